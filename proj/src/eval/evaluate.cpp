#include "ddsrec/eval/evaluate.hpp"
#include "ddsrec/numerics/format.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "ddsrec/errors.hpp"
#include "ddsrec/parallel.hpp"
#include "ddsrec/train/model.hpp"

namespace ddsrec::eval {

Split parse_split(const std::string& name) {
    if (name == "val" || name == "validation") return Split::kValidation;
    if (name == "test") return Split::kTest;
    throw std::invalid_argument("unknown split '" + name + "' (expected val or test)");
}

std::string split_name(Split s) { return s == Split::kValidation ? "val" : "test"; }

std::vector<std::string> metric_columns(std::span<const std::size_t> ks) {
    std::vector<std::string> cols;
    for (const char* m : {"recall", "ndcg", "ce", "cc"}) {
        for (std::size_t k : ks) cols.push_back(std::string(m) + "@" + std::to_string(k));
    }
    return cols;
}

std::vector<std::string> MetricsReport::column_names() const { return metric_columns(ks); }

double MetricsReport::get(const std::string& column) const {
    const auto cols = column_names();
    auto it = std::find(cols.begin(), cols.end(), column);
    if (it == cols.end()) throw std::out_of_range("no metric column " + column);
    return mean.at(static_cast<std::size_t>(it - cols.begin()));
}

EvalCase make_eval_case(const data::UserSplit& user, Split split, std::size_t max_len) {
    EvalCase c;
    c.input = user.train;
    c.excluded = user.train;
    if (split == Split::kValidation) {
        c.target = user.validation;
    } else {
        c.input.push_back(user.validation);
        c.excluded.push_back(user.validation);
        c.target = user.test;
    }
    if (c.input.size() > max_len) c.input.erase(c.input.begin(), c.input.end() - static_cast<std::ptrdiff_t>(max_len));
    return c;
}

MetricsReport evaluate_scores(const data::SplitDataset& dataset, Split split, std::span<const std::size_t> ks,
                              const Scorer& scorer, std::size_t workers) {
    if (ks.empty()) throw std::invalid_argument("evaluate: no cutoffs");
    MetricsReport report;
    report.ks.assign(ks.begin(), ks.end());
    const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
    const std::size_t nk = ks.size();
    const auto& catalog = dataset.catalog;
    report.per_user.assign(dataset.users.size(), std::vector<double>(4 * nk, 0.0));
    parallel_for(dataset.users.size(), workers, [&](std::size_t u) {
        const auto c = make_eval_case(dataset.users[u], split, dataset.max_len);
        const auto scores = scorer(c);
        if (scores.size() != catalog.item_count()) throw ShapeError("scorer returned wrong number of scores");
        std::vector<bool> excluded(catalog.item_count(), false);
        for (std::size_t it : c.excluded) excluded[it] = true;
        const auto full = topk(scores, kmax, excluded);
        auto& row = report.per_user[u];
        for (std::size_t j = 0; j < nk; ++j) {
            const RankedList list(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(std::min(ks[j], full.size())));
            row[j] = recall_at_k(list, c.target);
            row[nk + j] = ndcg_at_k(list, c.target);
            row[2 * nk + j] = ce_at_k(list, catalog);
            row[3 * nk + j] = cc_at_k(list, catalog);
        }
    });
    for (const auto& u : dataset.users) report.users.push_back(u.user);
    report.mean.assign(4 * nk, 0.0);
    for (const auto& row : report.per_user) {
        for (std::size_t j = 0; j < row.size(); ++j) report.mean[j] += row[j];
    }
    if (!report.per_user.empty()) {
        for (double& m : report.mean) m /= static_cast<double>(report.per_user.size());
    }
    return report;
}

MetricsReport evaluate(const train::ModelParams& model, const data::SplitDataset& dataset, Split split,
                       std::span<const std::size_t> ks, std::size_t workers) {
    if (model.num_items != dataset.catalog.item_count()) {
        throw ShapeError("model has " + std::to_string(model.num_items) + " items, dataset has " +
                         std::to_string(dataset.catalog.item_count()));
    }
    return evaluate_scores(
        dataset, split, ks,
        [&](const EvalCase& c) {
            Tape tape;
            ForwardContext ctx(tape, model.store);
            auto out = train::forward(ctx, model, c.input, dataset.catalog, std::nullopt);
            const auto row = out.logits.value().row(0);
            return std::vector<double>(row.begin(), row.end());
        },
        workers);
}

MetricsReport evaluate_popularity(const data::SplitDataset& dataset, Split split, std::span<const std::size_t> ks) {
    std::vector<double> counts(dataset.catalog.item_count(), 0.0);
    for (const auto& u : dataset.users) {
        for (std::size_t it : u.train) counts[it] += 1.0;
    }
    return evaluate_scores(dataset, split, ks, [&](const EvalCase&) { return counts; });
}

void write_report_json(const MetricsReport& report, const std::string& split, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["split"] = split;
    j["users"] = report.user_count();
    nlohmann::ordered_json metrics;
    const auto cols = report.column_names();
    for (std::size_t i = 0; i < cols.size(); ++i) metrics[cols[i]] = report.mean[i];
    j["metrics"] = metrics;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_report_csv(const MetricsReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "user";
    for (const auto& c : report.column_names()) out << ',' << c;
    out << '\n';
    for (std::size_t u = 0; u < report.per_user.size(); ++u) {
        out << report.users[u];
        for (double v : report.per_user[u]) out << ',' << format_double(v);
        out << '\n';
    }
}

}  // namespace ddsrec::eval
