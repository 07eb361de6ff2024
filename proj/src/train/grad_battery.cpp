#include "ddsrec/train/grad_battery.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ddsrec/numerics/ops.hpp"
#include "ddsrec/random.hpp"

namespace ddsrec::train {
namespace {

using Builder = std::function<DiffMatrix(ForwardContext&, const std::vector<ParamId>&)>;

std::size_t dim(std::mt19937_64& rng, std::size_t lo = 1, std::size_t hi = 4) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Matrix randn(std::size_t r, std::size_t c, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    Matrix m(r, c);
    for (double& v : m.flat()) v = n(rng);
    return m;
}

// Values bounded away from zero so the relu kink stays out of reach.
Matrix off_zero(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    Matrix m = randn(r, c, rng);
    for (double& v : m.flat()) {
        if (std::abs(v) < 0.05) v = v < 0 ? -0.05 - std::abs(v) : 0.05 + v;
    }
    return m;
}

OpTrial make_trial(std::vector<Matrix> inputs, Builder build) {
    OpTrial t;
    std::vector<ParamId> ids;
    for (std::size_t i = 0; i < inputs.size(); ++i) ids.push_back(t.store.add("x" + std::to_string(i), std::move(inputs[i])));
    t.apply = [ids, build = std::move(build)](ForwardContext& ctx) { return build(ctx, ids); };
    return t;
}

OpCase unary(std::string name, std::function<DiffMatrix(DiffMatrix)> f, bool avoid_zero = false) {
    return {name, [f, avoid_zero](std::mt19937_64& rng) {
                const std::size_t r = dim(rng), c = dim(rng);
                Matrix x = avoid_zero ? off_zero(r, c, rng) : randn(r, c, rng);
                return make_trial({std::move(x)}, [f](ForwardContext& ctx, const std::vector<ParamId>& id) {
                    return f(ctx.param(id[0]));
                });
            }};
}

OpCase binary_same(std::string name, std::function<DiffMatrix(DiffMatrix, DiffMatrix)> f) {
    return {name, [f](std::mt19937_64& rng) {
                const std::size_t r = dim(rng), c = dim(rng);
                return make_trial({randn(r, c, rng), randn(r, c, rng)},
                                  [f](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                      return f(ctx.param(id[0]), ctx.param(id[1]));
                                  });
            }};
}

// Small transformer/disentangle configurations for the composite cases.
encoders::TransformerConfig tiny_transformer(std::size_t d, std::size_t max_len) {
    encoders::TransformerConfig cfg;
    cfg.d = d;
    cfg.blocks = 1;
    cfg.heads = 2;
    cfg.ffn_mult = 2;
    cfg.dropout = 0.0;
    cfg.emb_dropout = 0.0;
    cfg.max_len = max_len;
    return cfg;
}

std::vector<std::size_t> random_seq(std::mt19937_64& rng, std::size_t len, std::size_t items) {
    std::uniform_int_distribution<std::size_t> pick(0, items - 1);
    std::vector<std::size_t> s(len);
    for (auto& v : s) v = pick(rng);
    return s;
}

data::Catalog micro_catalog(std::size_t items, std::size_t categories) {
    std::vector<std::string> it, cs;
    std::vector<std::vector<std::size_t>> ic;
    for (std::size_t i = 0; i < items; ++i) {
        it.push_back("i" + std::string(i < 10 ? "0" : "") + std::to_string(i));
        if (i == 0) ic.push_back({0, 1});  // one multi-category item
        else ic.push_back({i % categories});
    }
    for (std::size_t c = 0; c < categories; ++c) cs.push_back("c" + std::to_string(c));
    return data::Catalog(it, cs, ic);
}

bool is_discriminator(const std::string& name) { return name.find(".disc.") != std::string::npos; }

}  // namespace

bool BatteryReport::passed() const {
    for (const auto& e : entries) {
        if (!e.report.passed()) return false;
    }
    return true;
}

std::vector<OpCase> op_cases() {
    std::vector<OpCase> cases;
    cases.push_back({"matmul", [](std::mt19937_64& rng) {
                         const std::size_t r = dim(rng), k = dim(rng), c = dim(rng);
                         return make_trial({randn(r, k, rng), randn(k, c, rng)},
                                           [](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                               return ops::matmul(ctx.param(id[0]), ctx.param(id[1]));
                                           });
                     }});
    cases.push_back({"matmul_nt", [](std::mt19937_64& rng) {
                         const std::size_t r = dim(rng), k = dim(rng), c = dim(rng);
                         return make_trial({randn(r, k, rng), randn(c, k, rng)},
                                           [](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                               return ops::matmul_nt(ctx.param(id[0]), ctx.param(id[1]));
                                           });
                     }});
    cases.push_back(binary_same("add", ops::add));
    cases.push_back(binary_same("sub", ops::sub));
    cases.push_back(binary_same("mul", ops::mul));
    cases.push_back(unary("relu", ops::relu, true));
    cases.push_back(unary("scale", [](DiffMatrix a) { return ops::scale(a, -1.7); }));
    cases.push_back({"add_row", [](std::mt19937_64& rng) {
                         const std::size_t r = dim(rng), c = dim(rng);
                         return make_trial({randn(r, c, rng), randn(1, c, rng)},
                                           [](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                               return ops::add_row(ctx.param(id[0]), ctx.param(id[1]));
                                           });
                     }});
    cases.push_back(unary("rowwise_sum", [](DiffMatrix a) { return ops::rowwise_reduce(a, ops::Reduce::kSum); }));
    cases.push_back(unary("rowwise_mean", [](DiffMatrix a) { return ops::rowwise_reduce(a, ops::Reduce::kMean); }));
    cases.push_back(unary("sum_all", ops::sum_all));
    cases.push_back({"concat_cols", [](std::mt19937_64& rng) {
                         const std::size_t r = dim(rng);
                         return make_trial({randn(r, dim(rng), rng), randn(r, dim(rng), rng), randn(r, dim(rng), rng)},
                                           [](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                               const DiffMatrix parts[] = {ctx.param(id[0]), ctx.param(id[1]),
                                                                           ctx.param(id[2])};
                                               return ops::concat_cols(parts);
                                           });
                     }});
    cases.push_back({"slice_cols", [](std::mt19937_64& rng) {
                         const std::size_t r = dim(rng), c = dim(rng, 2, 5);
                         const std::size_t b = dim(rng, 0, c - 1), n = dim(rng, 1, c - b);
                         return make_trial({randn(r, c, rng)}, [b, n](ForwardContext& ctx, const std::vector<ParamId>& id) {
                             return ops::slice_cols(ctx.param(id[0]), b, n);
                         });
                     }});
    cases.push_back({"slice_rows", [](std::mt19937_64& rng) {
                         const std::size_t r = dim(rng, 2, 5), c = dim(rng);
                         const std::size_t b = dim(rng, 0, r - 1), n = dim(rng, 1, r - b);
                         return make_trial({randn(r, c, rng)}, [b, n](ForwardContext& ctx, const std::vector<ParamId>& id) {
                             return ops::slice_rows(ctx.param(id[0]), b, n);
                         });
                     }});
    cases.push_back({"gather_rows", [](std::mt19937_64& rng) {
                         const std::size_t r = dim(rng, 2, 5), c = dim(rng);
                         auto idx = random_seq(rng, dim(rng, 1, 6), r);  // repeats exercise accumulation
                         return make_trial({randn(r, c, rng)}, [idx](ForwardContext& ctx, const std::vector<ParamId>& id) {
                             return ops::gather_rows(ctx.param(id[0]), idx);
                         });
                     }});
    cases.push_back(unary("softmax_rows", ops::softmax_rows));
    cases.push_back({"causal_softmax_rows", [](std::mt19937_64& rng) {
                         const std::size_t n = dim(rng);
                         return make_trial({randn(n, n, rng)}, [](ForwardContext& ctx, const std::vector<ParamId>& id) {
                             return ops::causal_softmax_rows(ctx.param(id[0]));
                         });
                     }});
    cases.push_back({"layer_norm_rows", [](std::mt19937_64& rng) {
                         const std::size_t r = dim(rng), c = dim(rng, 2, 6);
                         return make_trial({randn(r, c, rng), randn(1, c, rng), randn(1, c, rng)},
                                           [](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                               return ops::layer_norm_rows(ctx.param(id[0]), ctx.param(id[1]),
                                                                           ctx.param(id[2]));
                                           });
                     }});
    cases.push_back({"cross_entropy_softmax", [](std::mt19937_64& rng) {
                         const std::size_t n = dim(rng, 2, 8);
                         const std::size_t target = dim(rng, 0, n - 1);
                         return make_trial({randn(1, n, rng, 2.0)},
                                           [target](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                               return ops::cross_entropy_softmax(ctx.param(id[0]), target);
                                           });
                     }});
    cases.push_back({"multilabel_cross_entropy", [](std::mt19937_64& rng) {
                         const std::size_t n = dim(rng, 1, 8);
                         std::vector<bool> t(n);
                         std::bernoulli_distribution coin(0.4);
                         for (std::size_t i = 0; i < n; ++i) t[i] = coin(rng);
                         return make_trial({randn(1, n, rng, 2.0)},
                                           [t](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                               return ops::multilabel_cross_entropy(ctx.param(id[0]), t);
                                           });
                     }});
    cases.push_back({"grad_reverse", [](std::mt19937_64& rng) {
                         const double factor = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
                         auto t = make_trial({randn(dim(rng), dim(rng), rng)},
                                             [factor](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                                 return ops::grad_reverse(ctx.param(id[0]), factor);
                                             });
                         t.backward_factor = factor;
                         return t;
                     }});
    cases.push_back({"dropout", [](std::mt19937_64& rng) {
                         const std::uint64_t s = rng();
                         return make_trial({randn(dim(rng), dim(rng), rng)},
                                           [s](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                               std::mt19937_64 local(s);  // same mask on every evaluation
                                               return ops::dropout(ctx.param(id[0]), 0.3, local);
                                           });
                     }});

    // Building blocks made of several ops.
    cases.push_back({"affine", [](std::mt19937_64& rng) {
                         const std::size_t r = dim(rng), k = dim(rng), c = dim(rng);
                         return make_trial({randn(r, k, rng), randn(k, c, rng), randn(1, c, rng)},
                                           [](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                               return affine(ctx, ctx.param(id[0]), id[1], id[2]);
                                           });
                     }});
    cases.push_back({"proxy_vector", [](std::mt19937_64& rng) {
                         const std::size_t items = dim(rng, 2, 6), d = dim(rng, 1, 4);
                         auto seq = random_seq(rng, dim(rng, 1, 7), items);
                         const std::size_t window = dim(rng, 1, 5);
                         return make_trial({randn(items, d, rng), randn(d, d, rng)},
                                           [seq, window](ForwardContext& ctx, const std::vector<ParamId>& id) {
                                               return seqdis::proxy_vector(ctx.param(id[0]), seq, ctx.param(id[1]),
                                                                           window);
                                           });
                     }});
    cases.push_back({"mhsa", [](std::mt19937_64& rng) {
                         OpTrial t;
                         const auto cfg = tiny_transformer(4, 5);
                         const auto ids = encoders::add_transformer_params(t.store, cfg, rng);
                         const auto x = t.store.add("x", randn(dim(rng, 1, 5), 4, rng));
                         t.apply = [cfg, ids, x](ForwardContext& ctx) {
                             return encoders::mhsa(ctx, ctx.param(x), ids.blocks[0], cfg);
                         };
                         return t;
                     }});
    cases.push_back({"ffn", [](std::mt19937_64& rng) {
                         OpTrial t;
                         const auto cfg = tiny_transformer(4, 5);
                         const auto ids = encoders::add_transformer_params(t.store, cfg, rng);
                         const auto x = t.store.add("x", randn(dim(rng, 1, 5), 4, rng));
                         t.apply = [ids, x](ForwardContext& ctx) { return encoders::ffn(ctx, ctx.param(x), ids.blocks[0]); };
                         return t;
                     }});
    cases.push_back({"transformer_encode", [](std::mt19937_64& rng) {
                         OpTrial t;
                         const auto cfg = tiny_transformer(4, 5);
                         const auto emb = encoders::add_embedding_params(t.store, 6, cfg, rng);
                         const auto ids = encoders::add_transformer_params(t.store, cfg, rng);
                         auto seq = random_seq(rng, dim(rng, 0, 5), 6);  // length 0 checks the fallback vector
                         t.apply = [cfg, emb, ids, seq](ForwardContext& ctx) {
                             return encoders::transformer_encode(ctx, emb, ids, seq, cfg);
                         };
                         return t;
                     }});
    cases.push_back({"mlp_encode_discrete", [](std::mt19937_64& rng) {
                         OpTrial t;
                         const auto cfg = tiny_transformer(4, 5);
                         const auto emb = encoders::add_embedding_params(t.store, 6, cfg, rng);
                         const auto ids = encoders::add_discrete_params(t.store, 4, rng);
                         // Nudge biases so relu inputs sit away from zero for most draws.
                         t.store[ids.b1].value = randn(1, 4, rng, 0.5);
                         auto seq = random_seq(rng, dim(rng, 0, 5), 6);
                         t.apply = [emb, ids, seq](ForwardContext& ctx) {
                             return encoders::mlp_encode_discrete(ctx, emb, ids, seq);
                         };
                         return t;
                     }});
    cases.push_back({"cross_fuse", [](std::mt19937_64& rng) {
                         OpTrial t;
                         const std::size_t d = dim(rng, 2, 4);
                         FusionIds f;
                         f.inner1_w = t.store.add("w1", randn(2 * d, d, rng));
                         f.inner1_b = t.store.add("b1", randn(1, d, rng));
                         f.inner2_w = t.store.add("w2", randn(2 * d, d, rng));
                         f.inner2_b = t.store.add("b2", randn(1, d, rng));
                         f.outer_w = t.store.add("w3", randn(2 * d, d, rng));
                         f.outer_b = t.store.add("b3", randn(1, d, rng));
                         std::vector<ParamId> h;
                         for (int i = 0; i < 4; ++i) h.push_back(t.store.add("h" + std::to_string(i), randn(1, d, rng)));
                         t.apply = [f, h](ForwardContext& ctx) {
                             return cross_fuse(ctx, f, ctx.param(h[0]), ctx.param(h[1]), ctx.param(h[2]), ctx.param(h[3]));
                         };
                         return t;
                     }});
    cases.push_back({"adversarial_losses_unreversed", [](std::mt19937_64& rng) {
                         OpTrial t;
                         const std::size_t d = dim(rng, 2, 4), c = dim(rng, 1, 4);
                         const auto branch = repdis::add_branch_params(t.store, "b", d, c, rng);
                         const auto h = t.store.add("h", randn(1, d, rng));
                         std::vector<bool> cats(c);
                         std::bernoulli_distribution coin(0.5);
                         for (std::size_t i = 0; i < c; ++i) cats[i] = coin(rng);
                         t.apply = [branch, h, cats](ForwardContext& ctx) {
                             auto comps = repdis::project_components(ctx, ctx.param(h), branch.projection);
                             auto l = repdis::adversarial_losses(ctx, comps, branch.discriminator, cats, 1.0);
                             return ops::add(l.related, ops::scale(l.independent, 0.7));
                         };
                         return t;
                     }});
    return cases;
}

BatteryReport run_op_battery(const std::vector<OpCase>& cases, std::size_t trials, std::uint64_t seed,
                             const GradCheckOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    BatteryReport out;
    for (const auto& oc : cases) {
        BatteryEntry entry{oc.name, trials, {}};
        auto rng = make_rng(seed, "gradcheck." + oc.name);
        for (std::size_t trial = 0; trial < trials; ++trial) {
            OpTrial t = oc.make(rng);
            // Probe once for the output shape, then fix a random weighting.
            Matrix weights;
            {
                Tape tape;
                auto ctx = ForwardContext::with_own_gradients(tape, t.store);
                const auto& v = t.apply(ctx).value();
                weights = randn(v.rows(), v.cols(), rng);
            }
            auto loss_of = [&](Tape& tape) {
                auto ctx = ForwardContext::with_own_gradients(tape, t.store);
                return ops::sum_all(ops::mul(t.apply(ctx), tape.constant(weights)));
            };
            for (auto& p : t.store.all()) p.grad = Matrix(p.value.rows(), p.value.cols());
            {
                Tape tape;
                tape.backward(loss_of(tape));
            }
            const auto objective = [&] {
                Tape tape;
                return loss_of(tape).scalar();
            };
            for (auto& p : t.store.all()) {
                Matrix numeric = numeric_gradient(objective, p, options.step);
                for (double& v : numeric.flat()) v *= t.backward_factor;
                compare_gradients(oc.name + "/" + p.name, p.grad, numeric, options.tolerance, entry.report);
            }
        }
        out.entries.push_back(std::move(entry));
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

GradCheckReport micro_model_check(Variant variant, std::uint64_t seed, const GradCheckOptions& options) {
    constexpr std::size_t kItems = 12, kCategories = 4, kLen = 6;
    const auto catalog = micro_catalog(kItems, kCategories);
    ModelConfig cfg;
    cfg.transformer = tiny_transformer(8, kLen);
    cfg.transformer.ffn_mult = 4;
    cfg.variant = variant;
    cfg.mask.theta_m = 0.0;
    cfg.mask.proxy_window = 3;

    // Pick an instance whose hard mask is not within reach of the probe step
    // and, when masking, routes items to both sides.
    auto rng = make_rng(seed, "gradcheck.micro");
    for (int attempt = 0; attempt < 1000; ++attempt) {
        ModelParams model = init_model(cfg, kItems, kCategories, rng());
        const auto seq = random_seq(rng, kLen, kItems);
        const std::size_t target = std::uniform_int_distribution<std::size_t>(0, kItems - 1)(rng);
        if (model.uses_masking()) {
            Tape tape;
            ForwardContext ctx(tape, model.store);
            auto proxy = seqdis::proxy_vector(ctx.param(model.embedding.items), seq,
                                              ctx.param(*model.proxy_transform), cfg.mask.proxy_window);
            const auto& table = model.store[model.embedding.items].value;
            double margin = 1.0;
            std::size_t trend = 0;
            for (std::size_t it : seq) {
                const double c = seqdis::cosine(table.row(it), proxy.value().row(0));
                margin = std::min(margin, std::abs(c - cfg.mask.theta_m));
                trend += c >= cfg.mask.theta_m;
            }
            if (margin < 1e-3 || trend == 0 || trend == seq.size()) continue;
        }

        for (auto& p : model.store.all()) p.grad = Matrix(p.value.rows(), p.value.cols());
        {
            Tape tape;
            auto ctx = ForwardContext::with_own_gradients(tape, model.store);
            auto out = forward(ctx, model, seq, catalog, target);
            tape.backward(out.loss->objective);
        }
        auto terms = [&] {
            Tape tape;
            ForwardContext ctx(tape, model.store);
            return forward(ctx, model, seq, catalog, target).loss->terms;
        };
        const auto main_part = [&] {
            const auto t = terms();
            return t.ce + cfg.lambda1 * (t.trend_related + t.discrete_related);
        };
        const auto independent_part = [&] {
            const auto t = terms();
            return t.trend_independent + t.discrete_independent;
        };
        GradCheckReport report;
        for (auto& p : model.store.all()) {
            Matrix expected = numeric_gradient(main_part, p, options.step);
            if (model.uses_adversarial()) {
                const Matrix ind = numeric_gradient(independent_part, p, options.step);
                const double s = is_discriminator(p.name) ? cfg.lambda2 : -cfg.lambda2;
                for (std::size_t i = 0; i < expected.size(); ++i) expected[i] += s * ind[i];
            }
            compare_gradients(variant_name(variant) + "/" + p.name, p.grad, expected, options.tolerance, report);
        }
        return report;
    }
    throw std::runtime_error("micro_model_check: no instance with a stable mask");
}

BatteryReport run_grad_battery(std::uint64_t seed, std::size_t trials) {
    const auto start = std::chrono::steady_clock::now();
    BatteryReport out = run_op_battery(op_cases(), trials, seed);
    for (Variant v : {Variant::kFull, Variant::kWithoutDD, Variant::kWithoutSD, Variant::kWithoutRD}) {
        out.entries.push_back({"micro_model/" + variant_name(v), 1, micro_model_check(v, seed)});
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace ddsrec::train
