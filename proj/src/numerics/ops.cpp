#include "ddsrec/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddsrec/errors.hpp"

namespace ddsrec::ops {
namespace {

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                     shape_string(b));
}

void same_tape(const char* op, DiffMatrix a, DiffMatrix b) {
    if (&a.tape() != &b.tape()) throw std::logic_error(std::string(op) + ": operands on different tapes");
}

double log1pexp(double x) {
    // log(1 + e^x) without overflow
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void softmax_row_inplace(std::span<double> row, std::size_t visible) {
    double mx = row[0];
    for (std::size_t j = 1; j < visible; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < visible; ++j) {
        row[j] = std::exp(row[j] - mx);
        z += row[j];
    }
    for (std::size_t j = 0; j < visible; ++j) row[j] /= z;
    for (std::size_t j = visible; j < row.size(); ++j) row[j] = 0.0;
}

DiffMatrix softmax_impl(DiffMatrix a, bool causal) {
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.rows(); ++i) {
        if (out.cols() == 0) break;
        const std::size_t visible = causal ? std::min(i + 1, out.cols()) : out.cols();
        softmax_row_inplace(out.row(i), visible);
    }
    const std::size_t ai = a.id();
    return a.tape().record(std::move(out), a.requires_grad(), [ai](Tape& t, std::size_t self) {
        const Matrix& y = t.value(self);
        const Matrix& g = t.grad(self);
        Matrix& ga = t.grad(ai);
        for (std::size_t i = 0; i < y.rows(); ++i) {
            auto yr = y.row(i);
            auto gr = g.row(i);
            double dot = 0.0;
            for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * gr[j];
            auto out = ga.row(i);
            for (std::size_t j = 0; j < yr.size(); ++j) out[j] += yr[j] * (gr[j] - dot);
        }
    });
}

}  // namespace

DiffMatrix matmul(DiffMatrix a, DiffMatrix b) {
    same_tape("matmul", a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.cols() != bv.rows()) shape_fail("matmul", av, bv);
    Matrix out(av.rows(), bv.cols());
    gemm_acc(av, bv, out);
    const std::size_t ai = a.id(), bi = b.id();
    return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                           [ai, bi](Tape& t, std::size_t self) {
                               const Matrix& g = t.grad(self);
                               if (t.requires_grad(ai)) gemm_nt_acc(g, t.value(bi), t.grad(ai));
                               if (t.requires_grad(bi)) gemm_tn_acc(t.value(ai), g, t.grad(bi));
                           });
}

DiffMatrix matmul_nt(DiffMatrix a, DiffMatrix b) {
    same_tape("matmul_nt", a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.cols() != bv.cols()) shape_fail("matmul_nt", av, bv);
    Matrix out(av.rows(), bv.rows());
    gemm_nt_acc(av, bv, out);
    const std::size_t ai = a.id(), bi = b.id();
    return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                           [ai, bi](Tape& t, std::size_t self) {
                               const Matrix& g = t.grad(self);
                               if (t.requires_grad(ai)) gemm_acc(g, t.value(bi), t.grad(ai));
                               if (t.requires_grad(bi)) gemm_tn_acc(g, t.value(ai), t.grad(bi));
                           });
}

DiffMatrix add(DiffMatrix a, DiffMatrix b) {
    same_tape("add", a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (!av.same_shape(bv)) shape_fail("add", av, bv);
    Matrix out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    const std::size_t ai = a.id(), bi = b.id();
    return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                           [ai, bi](Tape& t, std::size_t self) {
                               const Matrix& g = t.grad(self);
                               for (std::size_t id : {ai, bi}) {
                                   if (!t.requires_grad(id)) continue;
                                   Matrix& gp = t.grad(id);
                                   for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
                               }
                           });
}

DiffMatrix sub(DiffMatrix a, DiffMatrix b) { return add(a, scale(b, -1.0)); }

DiffMatrix mul(DiffMatrix a, DiffMatrix b) {
    same_tape("mul", a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (!av.same_shape(bv)) shape_fail("mul", av, bv);
    Matrix out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const std::size_t ai = a.id(), bi = b.id();
    return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                           [ai, bi](Tape& t, std::size_t self) {
                               const Matrix& g = t.grad(self);
                               if (t.requires_grad(ai)) {
                                   const Matrix& bv = t.value(bi);
                                   Matrix& ga = t.grad(ai);
                                   for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                               }
                               if (t.requires_grad(bi)) {
                                   const Matrix& av = t.value(ai);
                                   Matrix& gb = t.grad(bi);
                                   for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                               }
                           });
}

DiffMatrix relu(DiffMatrix a) {
    Matrix out = a.value();
    for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
    const std::size_t ai = a.id();
    return a.tape().record(std::move(out), a.requires_grad(), [ai](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& x = t.value(ai);
        Matrix& ga = t.grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] > 0.0) ga[i] += g[i];
        }
    });
}

DiffMatrix scale(DiffMatrix a, double c) {
    Matrix out = a.value();
    for (double& v : out.flat()) v *= c;
    const std::size_t ai = a.id();
    return a.tape().record(std::move(out), a.requires_grad(), [ai, c](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        Matrix& ga = t.grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

DiffMatrix add_row(DiffMatrix a, DiffMatrix row) {
    same_tape("add_row", a, row);
    const Matrix& av = a.value();
    const Matrix& rv = row.value();
    if (rv.rows() != 1 || rv.cols() != av.cols()) shape_fail("add_row", av, rv);
    Matrix out = av;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += rv[j];
    }
    const std::size_t ai = a.id(), ri = row.id();
    return a.tape().record(std::move(out), a.requires_grad() || row.requires_grad(),
                           [ai, ri](Tape& t, std::size_t self) {
                               const Matrix& g = t.grad(self);
                               if (t.requires_grad(ai)) {
                                   Matrix& ga = t.grad(ai);
                                   for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                               }
                               if (t.requires_grad(ri)) {
                                   Matrix& gr = t.grad(ri);
                                   for (std::size_t i = 0; i < g.rows(); ++i) {
                                       auto r = g.row(i);
                                       for (std::size_t j = 0; j < r.size(); ++j) gr[j] += r[j];
                                   }
                               }
                           });
}

DiffMatrix rowwise_reduce(DiffMatrix a, Reduce kind) {
    const Matrix& av = a.value();
    if (av.rows() == 0) throw ShapeError("rowwise_reduce: empty input");
    const double w = kind == Reduce::kMean ? 1.0 / static_cast<double>(av.rows()) : 1.0;
    Matrix out(1, av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i) {
        auto r = av.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
    }
    for (double& v : out.flat()) v *= w;
    const std::size_t ai = a.id();
    return a.tape().record(std::move(out), a.requires_grad(), [ai, w](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        Matrix& ga = t.grad(ai);
        for (std::size_t i = 0; i < ga.rows(); ++i) {
            auto r = ga.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) r[j] += w * g[j];
        }
    });
}

DiffMatrix sum_all(DiffMatrix a) {
    const Matrix& av = a.value();
    double s = 0.0;
    for (double v : av.flat()) s += v;
    const std::size_t ai = a.id();
    return a.tape().record(Matrix(1, 1, s), a.requires_grad(), [ai](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (double& v : t.grad(ai).flat()) v += g;
    });
}

DiffMatrix concat_cols(std::span<const DiffMatrix> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    Tape& tape = parts.front().tape();
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (&p.tape() != &tape) throw std::logic_error("concat_cols: operands on different tapes");
        if (p.rows() != rows) shape_fail("concat_cols", parts.front().value(), p.value());
        cols += p.cols();
        rg = rg || p.requires_grad();
    }
    Matrix out(rows, cols);
    std::vector<std::size_t> ids;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const Matrix& pv = p.value();
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy(pv.row(i).begin(), pv.row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
        }
        offset += pv.cols();
        ids.push_back(p.id());
    }
    return tape.record(std::move(out), rg, [ids = std::move(ids)](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        std::size_t off = 0;
        for (std::size_t id : ids) {
            const std::size_t c = t.value(id).cols();
            if (t.requires_grad(id)) {
                Matrix& gp = t.grad(id);
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    for (std::size_t j = 0; j < c; ++j) gp(i, j) += g(i, off + j);
                }
            }
            off += c;
        }
    });
}

DiffMatrix slice_cols(DiffMatrix a, std::size_t begin, std::size_t count) {
    const Matrix& av = a.value();
    if (begin + count > av.cols()) {
        throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + shape_string(av));
    }
    Matrix out(av.rows(), count);
    for (std::size_t i = 0; i < av.rows(); ++i) {
        for (std::size_t j = 0; j < count; ++j) out(i, j) = av(i, begin + j);
    }
    const std::size_t ai = a.id();
    return a.tape().record(std::move(out), a.requires_grad(), [ai, begin, count](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        Matrix& ga = t.grad(ai);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < count; ++j) ga(i, begin + j) += g(i, j);
        }
    });
}

DiffMatrix slice_rows(DiffMatrix a, std::size_t begin, std::size_t count) {
    const Matrix& av = a.value();
    if (begin + count > av.rows()) {
        throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + shape_string(av));
    }
    const std::size_t c = av.cols();
    Matrix out(count, c);
    std::copy(av.flat().begin() + static_cast<std::ptrdiff_t>(begin * c),
              av.flat().begin() + static_cast<std::ptrdiff_t>((begin + count) * c), out.flat().begin());
    const std::size_t ai = a.id();
    return a.tape().record(std::move(out), a.requires_grad(), [ai, begin](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        Matrix& ga = t.grad(ai);
        const std::size_t off = begin * g.cols();
        for (std::size_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
    });
}

DiffMatrix gather_rows(DiffMatrix table, std::span<const std::size_t> indices) {
    const Matrix& tv = table.value();
    const std::size_t c = tv.cols();
    Matrix out(indices.size(), c);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= tv.rows()) {
            throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                             shape_string(tv));
        }
        auto src = tv.row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    const std::size_t ti = table.id();
    return table.tape().record(std::move(out), table.requires_grad(),
                               [ti, idx = std::move(idx)](Tape& t, std::size_t self) {
                                   const Matrix& g = t.grad(self);
                                   Matrix& gt = t.grad(ti);
                                   for (std::size_t i = 0; i < idx.size(); ++i) {
                                       auto src = g.row(i);
                                       auto dst = gt.row(idx[i]);
                                       for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
                                   }
                               });
}

DiffMatrix softmax_rows(DiffMatrix a) { return softmax_impl(a, false); }
DiffMatrix causal_softmax_rows(DiffMatrix a) { return softmax_impl(a, true); }

DiffMatrix layer_norm_rows(DiffMatrix a, DiffMatrix gain, DiffMatrix bias, double eps) {
    same_tape("layer_norm_rows", a, gain);
    same_tape("layer_norm_rows", a, bias);
    const Matrix& av = a.value();
    const Matrix& gv = gain.value();
    const Matrix& bv = bias.value();
    const std::size_t n = av.cols();
    if (gv.size() != n) shape_fail("layer_norm_rows (gain)", av, gv);
    if (bv.size() != n) shape_fail("layer_norm_rows (bias)", av, bv);

    Matrix normalized(av.rows(), n);
    std::vector<double> inv_std(av.rows());
    Matrix out(av.rows(), n);
    for (std::size_t i = 0; i < av.rows(); ++i) {
        auto x = av.row(i);
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (std::size_t j = 0; j < n; ++j) {
            normalized(i, j) = (x[j] - mean) * is;
            out(i, j) = gv[j] * normalized(i, j) + bv[j];
        }
    }
    const std::size_t ai = a.id(), gi = gain.id(), bi = bias.id();
    const bool rg = a.requires_grad() || gain.requires_grad() || bias.requires_grad();
    return a.tape().record(
        std::move(out), rg,
        [ai, gi, bi, normalized = std::move(normalized), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
            const Matrix& g = t.grad(self);
            const Matrix& gv = t.value(gi);
            const std::size_t n = g.cols();
            const double nd = static_cast<double>(n);
            if (t.requires_grad(gi) || t.requires_grad(bi)) {
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                        if (t.requires_grad(gi)) t.grad(gi)[j] += g(i, j) * normalized(i, j);
                        if (t.requires_grad(bi)) t.grad(bi)[j] += g(i, j);
                    }
                }
            }
            if (!t.requires_grad(ai)) return;
            Matrix& ga = t.grad(ai);
            for (std::size_t i = 0; i < g.rows(); ++i) {
                double mean_d = 0.0, mean_dx = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = g(i, j) * gv[j];
                    mean_d += d;
                    mean_dx += d * normalized(i, j);
                }
                mean_d /= nd;
                mean_dx /= nd;
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = g(i, j) * gv[j];
                    ga(i, j) += inv_std[i] * (d - mean_d - normalized(i, j) * mean_dx);
                }
            }
        });
}

DiffMatrix cross_entropy_softmax(DiffMatrix logits, std::size_t target) {
    const Matrix& lv = logits.value();
    if (lv.rows() != 1) throw ShapeError("cross_entropy_softmax: logits must have one row, got " + shape_string(lv));
    if (target >= lv.cols()) {
        throw ShapeError("cross_entropy_softmax: target " + std::to_string(target) + " out of range for " +
                         std::to_string(lv.cols()) + " classes");
    }
    Matrix probs = lv;
    softmax_row_inplace(probs.row(0), probs.cols());
    double mx = lv[0];
    for (double v : lv.flat()) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : lv.flat()) z += std::exp(v - mx);
    const double loss = mx + std::log(z) - lv[target];
    const std::size_t li = logits.id();
    return logits.tape().record(Matrix(1, 1, loss), logits.requires_grad(),
                                [li, target, probs = std::move(probs)](Tape& t, std::size_t self) {
                                    const double g = t.grad(self)[0];
                                    Matrix& gl = t.grad(li);
                                    for (std::size_t j = 0; j < probs.cols(); ++j) {
                                        gl[j] += g * (probs[j] - (j == target ? 1.0 : 0.0));
                                    }
                                });
}

DiffMatrix multilabel_cross_entropy(DiffMatrix logits, const std::vector<bool>& targets) {
    const Matrix& lv = logits.value();
    if (lv.rows() != 1) {
        throw ShapeError("multilabel_cross_entropy: logits must have one row, got " + shape_string(lv));
    }
    if (targets.size() != lv.cols()) {
        throw ShapeError("multilabel_cross_entropy: " + std::to_string(lv.cols()) + " logits vs " +
                         std::to_string(targets.size()) + " targets");
    }
    const double n = static_cast<double>(lv.cols());
    double loss = 0.0;
    for (std::size_t j = 0; j < lv.cols(); ++j) {
        const double y = targets[j] ? 1.0 : 0.0;
        loss += log1pexp(lv[j]) - y * lv[j];
    }
    loss /= n;
    const std::size_t li = logits.id();
    return logits.tape().record(Matrix(1, 1, loss), logits.requires_grad(),
                                [li, targets, n](Tape& t, std::size_t self) {
                                    const double g = t.grad(self)[0];
                                    const Matrix& lv = t.value(li);
                                    Matrix& gl = t.grad(li);
                                    for (std::size_t j = 0; j < lv.cols(); ++j) {
                                        const double y = targets[j] ? 1.0 : 0.0;
                                        gl[j] += g * (sigmoid(lv[j]) - y) / n;
                                    }
                                });
}

DiffMatrix grad_reverse(DiffMatrix a, double factor) {
    Matrix out = a.value();
    const std::size_t ai = a.id();
    return a.tape().record(std::move(out), a.requires_grad(), [ai, factor](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        Matrix& ga = t.grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
    });
}

DiffMatrix dropout(DiffMatrix a, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return a;
    if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
    const double keep_scale = 1.0 / (1.0 - rate);
    std::bernoulli_distribution keep(1.0 - rate);
    Matrix mask(a.rows(), a.cols());
    for (double& m : mask.flat()) m = keep(rng) ? keep_scale : 0.0;
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    const std::size_t ai = a.id();
    return a.tape().record(std::move(out), a.requires_grad(),
                           [ai, mask = std::move(mask)](Tape& t, std::size_t self) {
                               const Matrix& g = t.grad(self);
                               Matrix& ga = t.grad(ai);
                               for (std::size_t i = 0; i < g.size(); ++i) ga[i] += mask[i] * g[i];
                           });
}

}  // namespace ddsrec::ops
