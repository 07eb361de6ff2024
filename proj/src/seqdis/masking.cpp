#include "ddsrec/seqdis/masking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ddsrec/errors.hpp"
#include "ddsrec/numerics/ops.hpp"

namespace ddsrec::seqdis {

void MaskConfig::validate(std::size_t max_len) const {
    if (proxy_window < 1 || proxy_window > max_len) {
        throw std::invalid_argument("mask.proxy_window must lie in [1, " + std::to_string(max_len) + "]");
    }
    if (!(theta_m >= -1.0 && theta_m <= 1.0)) throw std::invalid_argument("mask.theta_m must lie in [-1, 1]");
}

DiffMatrix proxy_vector(DiffMatrix item_table, std::span<const std::size_t> seq, DiffMatrix transform,
                        std::size_t window) {
    if (seq.empty()) throw std::invalid_argument("proxy_vector: empty sequence");
    const std::size_t p = std::min(std::max<std::size_t>(window, 1), seq.size());
    auto recent = ops::gather_rows(item_table, seq.subspan(seq.size() - p));
    // (1/p) sum_j W_s M_j, written as a row vector: mean(M_j) * W_s^T
    return ops::matmul_nt(ops::rowwise_reduce(recent, ops::Reduce::kMean), transform);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

MaskOutcome adaptive_mask(const Matrix& item_table, std::span<const std::size_t> seq, std::span<const double> proxy,
                          double theta_m) {
    if (proxy.size() != item_table.cols()) {
        throw ShapeError("adaptive_mask: proxy has " + std::to_string(proxy.size()) + " entries, embeddings have " +
                         std::to_string(item_table.cols()));
    }
    double proxy_norm = 0.0;
    for (double v : proxy) proxy_norm += v * v;
    MaskOutcome out;
    out.bits.reserve(seq.size());
    for (std::size_t item : seq) {
        if (item >= item_table.rows()) throw ShapeError("adaptive_mask: item index out of range");
        auto e = item_table.row(item);
        double en = 0.0;
        for (double v : e) en += v * v;
        if (proxy_norm == 0.0 || en == 0.0) ++out.degenerate;
        out.bits.push_back(cosine(e, proxy) >= theta_m);
    }
    return out;
}

std::vector<std::size_t> SequenceSplit::trend_items(std::span<const std::size_t> seq) const {
    std::vector<std::size_t> out;
    for (std::size_t p : trend_positions) out.push_back(seq[p]);
    return out;
}

std::vector<std::size_t> SequenceSplit::discrete_items(std::span<const std::size_t> seq) const {
    std::vector<std::size_t> out;
    for (std::size_t p : discrete_positions) out.push_back(seq[p]);
    return out;
}

SequenceSplit split_sequence(std::span<const std::size_t> seq, const std::vector<bool>& mask) {
    if (mask.size() != seq.size()) {
        throw ShapeError("split_sequence: mask length " + std::to_string(mask.size()) + " vs sequence length " +
                         std::to_string(seq.size()));
    }
    SequenceSplit s;
    s.mask = mask;
    for (std::size_t j = 0; j < seq.size(); ++j) (mask[j] ? s.trend_positions : s.discrete_positions).push_back(j);
    return s;
}

}  // namespace ddsrec::seqdis
