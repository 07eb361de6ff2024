#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ddsrec/cli/config.hpp"
#include "ddsrec/data/preprocess.hpp"

namespace ddsrec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Exclusive marker file in an output directory, removed on destruction.
/// Throws DataError when the directory is already locked.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::filesystem::path path_;
};

/// One-line dataset statistics row (users, items, interactions, categories, density).
std::string stats_table(const std::string& name, const data::DatasetStats& stats);

/// load -> k-core -> catalog -> sequences -> leave-one-out.
data::SplitDataset preprocess_log(const RunConfig& config, const std::filesystem::path& input, std::ostream& log);

// Each command writes into config.out and stores the resolved config there.
int cmd_preprocess(const RunConfig& config, std::ostream& log);
int cmd_synth(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_eval(const RunConfig& config, std::ostream& log);
int cmd_ablate(const RunConfig& config, std::ostream& log);
int cmd_gradcheck(const RunConfig& config, std::ostream& log);
int cmd_export_plots(const RunConfig& config, const std::vector<std::filesystem::path>& inputs, std::ostream& log);

}  // namespace ddsrec::cli
