#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ddsrec/numerics/tape.hpp"

// Differentiable operations over DiffMatrix. Every op validates shapes,
// computes its forward value eagerly and records a backward rule that
// accumulates into the parents' gradients.
namespace ddsrec::ops {

// Products
DiffMatrix matmul(DiffMatrix a, DiffMatrix b);
/// a * b^T; used for attention scores and tied-embedding scoring.
DiffMatrix matmul_nt(DiffMatrix a, DiffMatrix b);

// Elementwise
DiffMatrix add(DiffMatrix a, DiffMatrix b);
DiffMatrix sub(DiffMatrix a, DiffMatrix b);
DiffMatrix mul(DiffMatrix a, DiffMatrix b);
DiffMatrix relu(DiffMatrix a);
DiffMatrix scale(DiffMatrix a, double c);
/// a (r x c) plus a 1 x c row broadcast to every row.
DiffMatrix add_row(DiffMatrix a, DiffMatrix row);

// Reductions
enum class Reduce { kSum, kMean };
/// Collapses rows into a single 1 x cols row.
DiffMatrix rowwise_reduce(DiffMatrix a, Reduce kind);
DiffMatrix sum_all(DiffMatrix a);

// Structure
DiffMatrix concat_cols(std::span<const DiffMatrix> parts);
DiffMatrix slice_cols(DiffMatrix a, std::size_t begin, std::size_t count);
DiffMatrix slice_rows(DiffMatrix a, std::size_t begin, std::size_t count);
/// Embedding lookup: row i of the result is row indices[i] of `table`.
DiffMatrix gather_rows(DiffMatrix table, std::span<const std::size_t> indices);

// Normalization
DiffMatrix softmax_rows(DiffMatrix a);
/// Row i only sees columns 0..i; later columns get exactly zero weight.
DiffMatrix causal_softmax_rows(DiffMatrix a);
DiffMatrix layer_norm_rows(DiffMatrix a, DiffMatrix gain, DiffMatrix bias, double eps = 1e-8);

// Losses (1x1 results)
DiffMatrix cross_entropy_softmax(DiffMatrix logits, std::size_t target);
/// Mean over categories of the sigmoid cross entropy against a multi-hot target.
DiffMatrix multilabel_cross_entropy(DiffMatrix logits, const std::vector<bool>& targets);

// Gradient plumbing
/// Identity forward; backward multiplies the incoming gradient by `factor`.
DiffMatrix grad_reverse(DiffMatrix a, double factor);
/// Inverted dropout: keeps each entry with probability 1-rate and rescales by 1/(1-rate).
DiffMatrix dropout(DiffMatrix a, double rate, std::mt19937_64& rng);

}  // namespace ddsrec::ops
