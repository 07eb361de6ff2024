#pragma once

#include <filesystem>

#include "ddsrec/data/preprocess.hpp"

namespace ddsrec::data {

// A preprocessed dataset directory holds:
//   categories.tsv  category_index <TAB> category_token
//   catalog.tsv     item_index <TAB> item_token <TAB> category bit string (length |C|)
//   sequences.tsv   user <TAB> interactions <TAB> train items (space separated) <TAB> validation <TAB> test
//   stats.json      users, items, interactions, categories, density, max_len
// Lines starting with '#' are comments. See docs/formats.md.

void write_dataset_dir(const SplitDataset& dataset, const std::filesystem::path& dir);

/// Throws DataError on a missing or malformed directory.
SplitDataset read_dataset_dir(const std::filesystem::path& dir);

}  // namespace ddsrec::data
