#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ddsrec/train/model.hpp"

namespace ddsrec::train {

/// Dotted key/value view of a ModelConfig (model.*, mask.*, adv.*, variant).
std::vector<std::pair<std::string, std::string>> model_config_entries(const ModelConfig& config);
/// Sets one key. Returns false for a key that is not a model key; throws
/// std::invalid_argument for a malformed value.
bool set_model_config(ModelConfig& config, const std::string& key, const std::string& value);

/// FNV-1a over the serialized model config entries.
std::uint64_t config_hash(const ModelConfig& config);

struct CheckpointInfo {
    std::size_t epoch = 0;
    std::map<std::string, double> validation;  // metric column -> value
};

// Plain text, one file:
//   ddsrec-checkpoint 1
//   config_hash <16 hex digits>
//   items <n> / categories <n> / epoch <n>
//   config <key> <value>            (one per model config entry)
//   val <metric> <value>            (optional)
//   param <name> <rows> <cols>      followed by one line per row of hex floats
//   end
void save_checkpoint(const ModelParams& model, const CheckpointInfo& info, const std::filesystem::path& path);

struct LoadedCheckpoint {
    ModelParams model;
    CheckpointInfo info;
};

/// Rebuilds the parameter layout from the stored config and fills it.
/// Throws DataError for a missing/corrupt file, a hash mismatch, or any
/// parameter whose name or shape disagrees with the layout.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ddsrec::train
