#include "ddsrec/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ddsrec/errors.hpp"

namespace ddsrec::eval {
namespace {

void check_items(const RankedList& list, const data::Catalog& catalog) {
    for (std::size_t item : list) {
        if (item >= catalog.item_count()) throw DataError("metric: item " + std::to_string(item) + " not in catalog");
    }
}

}  // namespace

RankedList topk(std::span<const double> scores, std::size_t k, const std::vector<bool>& excluded) {
    std::vector<std::size_t> candidates;
    candidates.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i < excluded.size() && excluded[i]) continue;
        candidates.push_back(i);
    }
    const std::size_t take = std::min(k, candidates.size());
    auto better = [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(), better);
    candidates.resize(take);
    return candidates;
}

double recall_at_k(const RankedList& list, std::size_t target) {
    return std::find(list.begin(), list.end(), target) != list.end() ? 1.0 : 0.0;
}

double ndcg_at_k(const RankedList& list, std::size_t target) {
    auto it = std::find(list.begin(), list.end(), target);
    if (it == list.end()) return 0.0;
    const double rank = static_cast<double>(it - list.begin()) + 1.0;
    return 1.0 / std::log2(rank + 1.0);
}

double ce_at_k(const RankedList& list, const data::Catalog& catalog, double log_base) {
    check_items(list, catalog);
    if (list.empty()) return 0.0;
    std::vector<double> mass(catalog.category_count(), 0.0);
    for (std::size_t item : list) {
        const auto& cats = catalog.categories_of(item);
        const double w = 1.0 / static_cast<double>(cats.size());
        for (std::size_t c : cats) mass[c] += w;
    }
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    double h = 0.0;
    for (double m : mass) {
        if (m <= 0.0) continue;
        const double p = m / total;
        h -= p * std::log(p);
    }
    if (h <= 0.0) return 0.0;
    return log_base == std::numbers::e ? h : h / std::log(log_base);
}

double cc_at_k(const RankedList& list, const data::Catalog& catalog) {
    check_items(list, catalog);
    std::vector<bool> seen(catalog.category_count(), false);
    std::size_t distinct = 0;
    for (std::size_t item : list) {
        for (std::size_t c : catalog.categories_of(item)) {
            if (!seen[c]) {
                seen[c] = true;
                ++distinct;
            }
        }
    }
    return static_cast<double>(distinct) / static_cast<double>(catalog.category_count());
}

}  // namespace ddsrec::eval
