#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ddsrec/data/records.hpp"
#include "ddsrec/data/synth.hpp"
#include "ddsrec/train/trainer.hpp"

namespace ddsrec::cli {

/// Bad key or value in a config file or flag. Maps to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::filesystem::path input;        // data.input: raw interaction log
    std::filesystem::path dataset_dir;  // data.dir: preprocessed dataset directory
    data::FieldMapping format;
    std::size_t core = 5;               // data.core
    std::size_t max_len = 50;           // data.max_len

    data::SynthSpec synth;
    train::TrainConfig train;  // includes model, mask, adv keys
    std::vector<std::size_t> ks = {5, 10, 20};
    std::string split = "test";
    std::filesystem::path checkpoint;  // eval.checkpoint
    std::vector<std::uint64_t> ablate_seeds = {1};

    std::filesystem::path out = "out";
    std::uint64_t seed = 1;

    /// Resolved key/value listing, in a fixed order.
    std::vector<std::pair<std::string, std::string>> entries() const;
    /// Throws ConfigError for unknown keys or malformed values.
    void set(const std::string& key, const std::string& value);
    /// Propagates `seed` into the component configs that carry their own copy.
    void finalize();
};

/// Reads `key = value` lines; '#' starts a comment. Later lines win.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
/// Parses "key=value" (from --set).
void apply_assignment(RunConfig& config, const std::string& assignment);

std::string render_config(const RunConfig& config);
void write_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace ddsrec::cli
