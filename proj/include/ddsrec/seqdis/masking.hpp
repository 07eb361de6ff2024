#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ddsrec/numerics/parameters.hpp"

namespace ddsrec::seqdis {

struct MaskConfig {
    std::size_t proxy_window = 5;  // p
    double theta_m = 0.5;          // cosine threshold

    /// Throws std::invalid_argument unless 1 <= p <= max_len and -1 <= theta_m <= 1.
    void validate(std::size_t max_len) const;
};

/// Mean of W_s * M_i over the last `window` items of `seq` (all items when the
/// sequence is shorter). `item_table` is |I| x d, `transform` is d x d; the
/// result is 1 x d and differentiable in both.
DiffMatrix proxy_vector(DiffMatrix item_table, std::span<const std::size_t> seq, DiffMatrix transform,
                        std::size_t window);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

struct MaskOutcome {
    std::vector<bool> bits;       // bit j set iff cosine(M_{seq[j]}, proxy) >= theta_m
    std::size_t degenerate = 0;   // comparisons involving a zero-norm vector
};

/// Hard routing decision; nothing here is differentiated.
MaskOutcome adaptive_mask(const Matrix& item_table, std::span<const std::size_t> seq, std::span<const double> proxy,
                          double theta_m);

struct SequenceSplit {
    std::vector<std::size_t> trend_positions;
    std::vector<std::size_t> discrete_positions;
    std::vector<bool> mask;

    std::vector<std::size_t> trend_items(std::span<const std::size_t> seq) const;
    std::vector<std::size_t> discrete_items(std::span<const std::size_t> seq) const;
};

/// Positions with bit 1 go to the trend side, bit 0 to the discrete side, both
/// in original order. Throws ShapeError on a length mismatch.
SequenceSplit split_sequence(std::span<const std::size_t> seq, const std::vector<bool>& mask);

}  // namespace ddsrec::seqdis
