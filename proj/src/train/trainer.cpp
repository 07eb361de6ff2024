#include "ddsrec/train/trainer.hpp"
#include "ddsrec/numerics/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ddsrec/errors.hpp"
#include "ddsrec/parallel.hpp"
#include "ddsrec/random.hpp"

namespace ddsrec::train {
namespace {

// Gradient accumulation granularity. Fixed so the summation order, and so
// the result, never depends on the worker count.
constexpr std::size_t kChunk = 16;

void add_terms(LossTerms& into, const LossTerms& t) {
    into.ce += t.ce;
    into.trend_related += t.trend_related;
    into.trend_independent += t.trend_independent;
    into.discrete_related += t.discrete_related;
    into.discrete_independent += t.discrete_independent;
    into.reported += t.reported;
}

LossTerms scaled(LossTerms t, double c) {
    t.ce *= c;
    t.trend_related *= c;
    t.trend_independent *= c;
    t.discrete_related *= c;
    t.discrete_independent *= c;
    t.reported *= c;
    return t;
}

bool finite_terms(const LossTerms& t) {
    return std::isfinite(t.ce) && std::isfinite(t.trend_related) && std::isfinite(t.trend_independent) &&
           std::isfinite(t.discrete_related) && std::isfinite(t.discrete_independent) && std::isfinite(t.reported);
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

void TrainConfig::validate() const {
    model.validate();
    if (batch_size == 0) throw std::invalid_argument("train.batch_size must be >= 1");
    if (epochs == 0) throw std::invalid_argument("train.epochs must be >= 1");
    if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("train.lr must be > 0");
}

std::vector<std::vector<TrainExample>> epoch_batches(const data::SplitDataset& dataset, const TrainConfig& config,
                                                     std::size_t epoch) {
    std::vector<std::size_t> order(dataset.users.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = make_rng(config.seed, "train.shuffle", epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    std::vector<std::vector<TrainExample>> batches;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        std::vector<TrainExample> batch;
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        for (std::size_t i = start; i < end; ++i) {
            const std::size_t u = order[i];
            const std::size_t n = dataset.users[u].train.size();
            std::vector<std::size_t> positions;
            for (std::size_t p = 1; p < n; ++p) positions.push_back(p);
            if (config.max_targets_per_user > 0 && positions.size() > config.max_targets_per_user) {
                auto rng = make_rng(config.seed, "train.targets", epoch * dataset.users.size() + u);
                std::shuffle(positions.begin(), positions.end(), rng);
                positions.resize(config.max_targets_per_user);
                std::sort(positions.begin(), positions.end());
            }
            for (std::size_t p : positions) batch.push_back({u, p});
        }
        if (!batch.empty()) batches.push_back(std::move(batch));
    }
    return batches;
}

BatchGradients example_gradients(const ModelParams& model, const data::SplitDataset& dataset,
                                 std::span<const TrainExample> examples, const std::uint64_t* dropout_seed,
                                 std::size_t epoch) {
    BatchGradients out{GradientSet(model.store), {}, 0};
    for (const auto& ex : examples) {
        const auto& train = dataset.users.at(ex.user).train;
        const std::span<const std::size_t> input(train.data(), ex.position);
        Tape tape;
        ForwardContext ctx(tape, model.store, out.grads);
        std::mt19937_64 rng;
        if (dropout_seed) {
            rng.seed(derive_seed(derive_seed(*dropout_seed, "train.dropout", epoch), "example",
                                 ex.user * 1000003ULL + ex.position));
            ctx.enable_training(rng);
        }
        auto fwd = forward(ctx, model, input, dataset.catalog, train[ex.position]);
        if (!finite_terms(fwd.loss->terms)) {
            throw NumericalError("non-finite loss for user " + dataset.users[ex.user].user + " at position " +
                                 std::to_string(ex.position));
        }
        tape.backward(fwd.loss->objective);
        add_terms(out.loss, fwd.loss->terms);
        out.degenerate += fwd.degenerate_cosines;
    }
    return out;
}

std::vector<std::string> history_columns(Variant variant) {
    std::vector<std::string> cols = {"epoch", "examples", "loss", "ce"};
    if (variant == Variant::kFull || variant == Variant::kWithoutSD) {
        cols.insert(cols.end(), {"trend_related", "trend_independent"});
    }
    if (variant == Variant::kFull) cols.insert(cols.end(), {"discrete_related", "discrete_independent"});
    if (variant == Variant::kFull || variant == Variant::kWithoutRD) cols.push_back("degenerate_cosines");
    for (const auto& m : eval::metric_columns(eval::kDefaultKs)) cols.push_back("val_" + m);
    return cols;
}

std::vector<double> history_row(const EpochRecord& rec, Variant variant) {
    std::vector<double> row = {static_cast<double>(rec.epoch), static_cast<double>(rec.examples), rec.loss.reported,
                               rec.loss.ce};
    if (variant == Variant::kFull || variant == Variant::kWithoutSD) {
        row.insert(row.end(), {rec.loss.trend_related, rec.loss.trend_independent});
    }
    if (variant == Variant::kFull) row.insert(row.end(), {rec.loss.discrete_related, rec.loss.discrete_independent});
    if (variant == Variant::kFull || variant == Variant::kWithoutRD) row.push_back(rec.degenerate_cosines);
    row.insert(row.end(), rec.validation.begin(), rec.validation.end());
    return row;
}

void write_history_csv(const std::vector<EpochRecord>& history, Variant variant, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    const auto cols = history_columns(variant);
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& rec : history) {
        const auto row = history_row(rec, variant);
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt(row[i]);
        out << '\n';
    }
}

TrainResult train_model(const data::SplitDataset& dataset, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (dataset.users.empty()) throw DataError("train: dataset has no users");
    TrainConfig cfg = config;

    ModelParams model = init_model(cfg.model, dataset.catalog.item_count(), dataset.catalog.category_count(), cfg.seed);
    AdamState adam(model.store);
    TrainResult result{model, {}, 0, -1.0, false};
    std::size_t since_best = 0;
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        LossTerms sums;
        std::size_t degenerate = 0;
        for (const auto& batch : epoch_batches(dataset, cfg, epoch)) {
            ++step;
            const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
            std::vector<BatchGradients> parts(chunks);
            parallel_for(chunks, cfg.workers, [&](std::size_t c) {
                const std::size_t lo = c * kChunk;
                const std::size_t hi = std::min(batch.size(), lo + kChunk);
                parts[c] = example_gradients(model, dataset, std::span(batch).subspan(lo, hi - lo), &cfg.seed, epoch);
            });
            GradientSet total = std::move(parts[0].grads);
            for (std::size_t c = 1; c < chunks; ++c) total.accumulate(parts[c].grads);
            for (const auto& p : parts) {
                add_terms(sums, p.loss);
                degenerate += p.degenerate;
            }
            total.scale(1.0 / static_cast<double>(batch.size()));
            rec.examples += batch.size();
            try {
                adam_step(model.store, total, adam, cfg.adam);
            } catch (const NumericalError& e) {
                throw NumericalError("epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ": " +
                                     e.what());
            }
        }
        rec.loss = scaled(sums, 1.0 / static_cast<double>(std::max<std::size_t>(rec.examples, 1)));
        rec.degenerate_cosines = static_cast<double>(degenerate) / static_cast<double>(std::max<std::size_t>(rec.examples, 1));
        if (!finite_terms(rec.loss)) {
            throw NumericalError("epoch " + std::to_string(epoch) + ": non-finite mean loss");
        }
        const auto val = eval::evaluate(model, dataset, eval::Split::kValidation, eval::kDefaultKs, cfg.workers);
        rec.validation = val.mean;
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec, model);

        const double ndcg10 = val.get("ndcg@10");
        if (ndcg10 > result.best_ndcg10) {
            result.best_ndcg10 = ndcg10;
            result.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            result.stopped_early = true;
            break;
        }
    }
    if (!cfg.keep_best) result.model = std::move(model);
    return result;
}

double training_hit_rate(const ModelParams& model, const data::SplitDataset& dataset, std::size_t k,
                         std::size_t workers) {
    std::vector<double> hits(dataset.users.size(), 0.0);
    std::vector<double> counts(dataset.users.size(), 0.0);
    const std::vector<bool> none;
    parallel_for(dataset.users.size(), workers, [&](std::size_t u) {
        const auto& train = dataset.users[u].train;
        for (std::size_t p = 1; p < train.size(); ++p) {
            Tape tape;
            ForwardContext ctx(tape, model.store);
            auto out = forward(ctx, model, std::span(train.data(), p), dataset.catalog, std::nullopt);
            const auto top = eval::topk(out.logits.value().row(0), k, none);
            hits[u] += eval::recall_at_k(top, train[p]);
            counts[u] += 1.0;
        }
    });
    const double h = std::accumulate(hits.begin(), hits.end(), 0.0);
    const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
    return n > 0.0 ? h / n : 0.0;
}

}  // namespace ddsrec::train
