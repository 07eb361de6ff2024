#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "ddsrec/data/records.hpp"

namespace ddsrec::eval {

using RankedList = std::vector<std::size_t>;

/// The `k` highest-scoring items not marked in `excluded` (indexed by item,
/// may be empty), by descending score with ties going to the lower index.
/// Returns fewer than k items only when fewer remain.
RankedList topk(std::span<const double> scores, std::size_t k, const std::vector<bool>& excluded = {});

/// 1 if the target appears in the list.
double recall_at_k(const RankedList& list, std::size_t target);

/// 1 / log2(rank + 1) for the target's 1-based rank, 0 if absent.
double ndcg_at_k(const RankedList& list, std::size_t target);

/// Entropy of the category distribution of the list. Each item spreads weight
/// 1/|categories(item)| over its categories. Natural log unless `log_base`
/// says otherwise. Throws DataError for items outside the catalog.
double ce_at_k(const RankedList& list, const data::Catalog& catalog, double log_base = std::numbers::e);

/// Distinct categories appearing in the list divided by |C|.
double cc_at_k(const RankedList& list, const data::Catalog& catalog);

}  // namespace ddsrec::eval
