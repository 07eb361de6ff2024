#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ddsrec/data/records.hpp"

namespace ddsrec::data {

/// Removes users and items with fewer than `k` interactions, repeating until
/// no more removals happen. Throws DataError if nothing survives.
std::vector<InteractionRecord> five_core_filter(std::vector<InteractionRecord> records, std::size_t k = 5);

/// One user's chronologically ordered item indices.
struct UserHistory {
    std::string user;
    std::vector<std::size_t> items;
};

/// Groups records by user (users in sorted token order) and stable-sorts each
/// user's events by timestamp; equal timestamps keep their input order.
std::vector<UserHistory> build_sequences(const std::vector<InteractionRecord>& records, const Catalog& catalog);

struct UserSplit {
    std::string user;
    std::vector<std::size_t> train;  // most recent `max_len` training items
    std::size_t validation = 0;
    std::size_t test = 0;
    std::size_t interactions = 0;  // full history length before truncation

    friend bool operator==(const UserSplit&, const UserSplit&) = default;
};

struct SplitDataset {
    Catalog catalog;
    std::vector<UserSplit> users;
    std::size_t max_len = 50;
    std::vector<std::string> dropped_users;  // histories shorter than 3
};

/// Leave-one-out: last item is the test target, second-to-last the
/// validation target, the rest (truncated to the most recent `max_len`) is
/// the training sequence.
SplitDataset leave_one_out_split(const std::vector<UserHistory>& sequences, Catalog catalog, std::size_t max_len = 50);

struct DatasetStats {
    std::size_t users = 0;
    std::size_t items = 0;
    std::size_t interactions = 0;
    std::size_t categories = 0;
    double density = 0.0;  // interactions / (users * items)
};

DatasetStats dataset_stats(const SplitDataset& split);

}  // namespace ddsrec::data
