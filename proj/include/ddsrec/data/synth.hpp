#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ddsrec/data/records.hpp"

namespace ddsrec::data {

/// Parameters of the planted multi-interest generator.
///
/// Items are split into `categories` contiguous blocks. Every user owns
/// `interests_per_user` distinct categories; each interest walks its block in
/// a fixed cyclic order from a random start, so the successor of an item
/// within an interest is predictable. Each event is drawn from the
/// interests (the first with weight `dominant_weight`, the rest sharing the
/// remainder) or, with probability `noise_rate`, uniformly from all items.
struct SynthSpec {
    std::size_t users = 1000;
    std::size_t items = 200;
    std::size_t categories = 8;
    std::size_t interests_per_user = 2;
    double noise_rate = 0.1;
    std::uint64_t seed = 1;
    std::size_t min_events = 20;
    std::size_t max_events = 30;
    double dominant_weight = 0.6;
};

inline constexpr int kNoiseLabel = -1;

struct SynthDataset {
    std::vector<InteractionRecord> records;
    /// Per record: index of the generating interest slot, or kNoiseLabel.
    std::vector<int> interest_labels;
    /// Per user: the category of each interest slot.
    std::vector<std::vector<std::size_t>> user_interests;
    /// Per item (in generator numbering): its category.
    std::vector<std::size_t> item_category;
};

/// Deterministic per seed. Throws DataError for an infeasible spec.
SynthDataset synthesize_dataset(const SynthSpec& spec);

}  // namespace ddsrec::data
