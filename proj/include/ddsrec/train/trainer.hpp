#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ddsrec/data/preprocess.hpp"
#include "ddsrec/eval/evaluate.hpp"
#include "ddsrec/train/adam.hpp"
#include "ddsrec/train/model.hpp"

namespace ddsrec::train {

struct TrainConfig {
    ModelConfig model;
    AdamOptions adam;
    std::size_t batch_size = 128;  // users per optimizer step
    std::size_t epochs = 200;
    std::size_t patience = 10;     // epochs without a validation NDCG@10 gain
    std::uint64_t seed = 1;
    // Each user contributes every (prefix -> next item) pair of its training
    // sequence. A positive cap keeps only that many, redrawn every epoch.
    std::size_t max_targets_per_user = 0;
    std::size_t workers = 1;
    bool keep_best = true;  // false: return the last epoch's parameters

    void validate() const;
};

/// One training example: train[0..position) predicts train[position].
struct TrainExample {
    std::size_t user = 0;
    std::size_t position = 0;
};

/// Examples of one epoch in processing order. Users are shuffled with a
/// seeded stream per epoch.
std::vector<std::vector<TrainExample>> epoch_batches(const data::SplitDataset& dataset, const TrainConfig& config,
                                                     std::size_t epoch);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    std::size_t examples = 0;
    LossTerms loss;  // example means
    double degenerate_cosines = 0.0;
    std::vector<double> validation;  // eval::metric_columns(kDefaultKs) order
};

/// Column names of the history CSV. Adversarial columns exist only for the
/// variants that have discriminators.
std::vector<std::string> history_columns(Variant variant);
std::vector<double> history_row(const EpochRecord& rec, Variant variant);
void write_history_csv(const std::vector<EpochRecord>& history, Variant variant, const std::filesystem::path& path);

struct TrainResult {
    ModelParams model;  // best-validation (or final) parameters
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_ndcg10 = 0.0;
    bool stopped_early = false;
};

/// Called after every epoch with the fresh record and the current (not best)
/// parameters; may be empty.
using EpochCallback = std::function<void(const EpochRecord&, const ModelParams&)>;

/// Throws NumericalError on a non-finite loss or gradient, naming the epoch
/// and step.
TrainResult train_model(const data::SplitDataset& dataset, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});

/// Summed gradients and loss terms of a list of examples; used by training
/// and by the end-to-end gradient check.
struct BatchGradients {
    GradientSet grads;
    LossTerms loss;  // sums
    std::size_t degenerate = 0;
};

/// Forward/backward over the examples. With a non-null `dropout_seed` the
/// dropout stream of each example is derived from (seed, epoch, user,
/// position); otherwise dropout is off.
BatchGradients example_gradients(const ModelParams& model, const data::SplitDataset& dataset,
                                 std::span<const TrainExample> examples, const std::uint64_t* dropout_seed,
                                 std::size_t epoch);

/// Fraction of training examples whose target is the top-ranked item when
/// nothing is excluded. Measures memorization.
double training_hit_rate(const ModelParams& model, const data::SplitDataset& dataset, std::size_t k = 1,
                         std::size_t workers = 1);

}  // namespace ddsrec::train
