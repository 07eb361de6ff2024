#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ddsrec/data/preprocess.hpp"
#include "ddsrec/eval/metrics.hpp"

namespace ddsrec::train {
struct ModelParams;
}

namespace ddsrec::eval {

enum class Split { kValidation, kTest };
Split parse_split(const std::string& name);  // "val" / "validation" / "test"
std::string split_name(Split s);

inline const std::vector<std::size_t> kDefaultKs = {5, 10, 20};

/// Per-user and mean Recall/NDCG/CE/CC for every K. Columns are ordered
/// recall@K..., ndcg@K..., ce@K..., cc@K... following `ks`.
struct MetricsReport {
    std::vector<std::size_t> ks;
    std::vector<std::string> users;
    std::vector<std::vector<double>> per_user;  // rows align with `users`, columns with column_names()
    std::vector<double> mean;

    std::vector<std::string> column_names() const;
    std::size_t user_count() const noexcept { return users.size(); }
    /// Mean of a named column, e.g. "ndcg@10". Throws std::out_of_range.
    double get(const std::string& column) const;
};

std::vector<std::string> metric_columns(std::span<const std::size_t> ks);

/// Ranking input of one user: the model input sequence, the held-out target,
/// and the items excluded from ranking.
struct EvalCase {
    std::vector<std::size_t> input;
    std::size_t target = 0;
    std::vector<std::size_t> excluded;
};

/// validation: input = train, exclude train. test: input = train + validation
/// (most recent max_len), exclude train and the validation item.
EvalCase make_eval_case(const data::UserSplit& user, Split split, std::size_t max_len);

/// Returns one score per catalog item for a user.
using Scorer = std::function<std::vector<double>(const EvalCase&)>;

/// Scores every user (in parallel, merged by user index), ranks, and computes
/// all metrics.
MetricsReport evaluate_scores(const data::SplitDataset& dataset, Split split, std::span<const std::size_t> ks,
                              const Scorer& scorer, std::size_t workers = 1);

/// Model scores with dropout off.
MetricsReport evaluate(const train::ModelParams& model, const data::SplitDataset& dataset, Split split,
                       std::span<const std::size_t> ks = kDefaultKs, std::size_t workers = 1);

/// Ranks items by their frequency in the training sequences.
MetricsReport evaluate_popularity(const data::SplitDataset& dataset, Split split,
                                  std::span<const std::size_t> ks = kDefaultKs);

/// Aggregate JSON: {"split", "users", "metrics": {column: mean}}.
void write_report_json(const MetricsReport& report, const std::string& split, const std::filesystem::path& path);
/// Per-user CSV: user,<columns>.
void write_report_csv(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace ddsrec::eval
