#include "ddsrec/cli/commands.hpp"
#include "ddsrec/numerics/format.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "ddsrec/data/dataset_io.hpp"
#include "ddsrec/errors.hpp"
#include "ddsrec/eval/evaluate.hpp"
#include "ddsrec/parallel.hpp"
#include "ddsrec/train/checkpoint.hpp"
#include "ddsrec/train/grad_battery.hpp"
#include "ddsrec/train/trainer.hpp"

namespace fs = std::filesystem;

namespace ddsrec::cli {
namespace {

std::string num(double v) { return format_double(v); }

void prepare_out(const RunConfig& config) {
    std::error_code ec;
    fs::create_directories(config.out, ec);
    if (ec) throw DataError("cannot create output directory " + config.out.string() + ": " + ec.message());
}

void write_records_tsv(const std::vector<data::InteractionRecord>& records, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "user\titem\ttimestamp\tcategories\n";
    for (const auto& r : records) {
        out << r.user << '\t' << r.item << '\t' << r.timestamp << '\t';
        for (std::size_t i = 0; i < r.categories.size(); ++i) out << (i ? "|" : "") << r.categories[i];
        out << '\n';
    }
}

data::SplitDataset load_dataset(const RunConfig& config) {
    if (config.dataset_dir.empty()) throw ConfigError("data.dir is not set");
    return data::read_dataset_dir(config.dataset_dir);
}

train::TrainConfig train_config(const RunConfig& config) {
    train::TrainConfig t = config.train;
    t.seed = config.seed;
    t.workers = worker_count();
    return t;
}

train::TrainResult run_training(const train::TrainConfig& tc, const data::SplitDataset& ds, std::ostream& log,
                                const std::string& tag) {
    const auto cols = eval::metric_columns(eval::kDefaultKs);
    const auto ndcg10 = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), "ndcg@10") - cols.begin());
    return train::train_model(ds, tc, [&](const train::EpochRecord& rec, const train::ModelParams&) {
        log << tag << "epoch " << rec.epoch << " loss " << std::setprecision(5) << rec.loss.reported << " ce "
            << rec.loss.ce << " val_ndcg@10 " << rec.validation[ndcg10] << '\n';
    });
}

train::CheckpointInfo checkpoint_info(const train::TrainResult& result) {
    train::CheckpointInfo info;
    info.epoch = result.best_epoch;
    if (result.best_epoch > 0) {
        const auto cols = eval::metric_columns(eval::kDefaultKs);
        const auto& v = result.history.at(result.best_epoch - 1).validation;
        for (std::size_t i = 0; i < cols.size(); ++i) info.validation[cols[i]] = v[i];
    }
    return info;
}

std::pair<std::string, std::size_t> split_metric(const std::string& name) {
    const auto at = name.find('@');
    if (at == std::string::npos) return {name, 0};
    return {name.substr(0, at), static_cast<std::size_t>(std::stoul(name.substr(at + 1)))};
}

std::string variant_of_dir(const fs::path& dir) {
    std::ifstream in(dir / "config.txt");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model.variant", 0) == 0) {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                auto v = line.substr(eq + 1);
                v.erase(0, v.find_first_not_of(' '));
                return v;
            }
        }
    }
    return "unknown";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".ddsrec.lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) {
            throw DataError("output directory " + dir.string() + " is locked by another run (remove " +
                            path_.string() + " if that run is gone)");
        }
        throw DataError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    ::close(fd);
}

OutputLock::~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

std::string stats_table(const std::string& name, const data::DatasetStats& s) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "dataset" << std::setw(10) << "#users" << std::setw(10) << "#items"
       << std::setw(15) << "#interactions" << std::setw(13) << "#categories" << "density\n";
    os << std::setw(12) << name << std::setw(10) << s.users << std::setw(10) << s.items << std::setw(15)
       << s.interactions << std::setw(13) << s.categories << std::fixed << std::setprecision(2) << s.density * 100.0
       << "%\n";
    return os.str();
}

data::SplitDataset preprocess_log(const RunConfig& config, const fs::path& input, std::ostream& log) {
    auto loaded = data::load_interactions(input, config.format);
    if (loaded.skipped > 0) {
        log << "skipped " << loaded.skipped << " malformed line(s) in " << input.string() << ", first at line "
            << loaded.skipped_lines.front() << '\n';
    }
    auto records = data::five_core_filter(std::move(loaded.records), config.core);
    auto catalog = data::Catalog::from_records(records);
    auto sequences = data::build_sequences(records, catalog);
    return data::leave_one_out_split(sequences, std::move(catalog), config.max_len);
}

int cmd_preprocess(const RunConfig& config, std::ostream& log) {
    if (config.input.empty()) throw ConfigError("data.input is not set");
    prepare_out(config);
    OutputLock lock(config.out);
    const auto ds = preprocess_log(config, config.input, log);
    data::write_dataset_dir(ds, config.out);
    write_config(config, config.out / "config.txt");
    log << stats_table(config.input.stem().string(), data::dataset_stats(ds));
    return kExitOk;
}

int cmd_synth(const RunConfig& config, std::ostream& log) {
    prepare_out(config);
    OutputLock lock(config.out);
    data::SynthSpec spec = config.synth;
    spec.seed = config.seed;
    const auto synth = data::synthesize_dataset(spec);
    write_records_tsv(synth.records, config.out / "interactions.tsv");
    {
        std::ofstream labels(config.out / "labels.tsv", std::ios::binary);
        labels << "user\titem\ttimestamp\tinterest\n";
        for (std::size_t i = 0; i < synth.records.size(); ++i) {
            const auto& r = synth.records[i];
            labels << r.user << '\t' << r.item << '\t' << r.timestamp << '\t' << synth.interest_labels[i] << '\n';
        }
    }
    RunConfig pre = config;
    pre.format = data::FieldMapping{};
    const auto ds = preprocess_log(pre, config.out / "interactions.tsv", log);
    data::write_dataset_dir(ds, config.out / "dataset");
    write_config(config, config.out / "config.txt");
    log << stats_table("synthetic", data::dataset_stats(ds));
    return kExitOk;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
    const auto ds = load_dataset(config);
    prepare_out(config);
    OutputLock lock(config.out);
    write_config(config, config.out / "config.txt");
    const auto tc = train_config(config);
    const auto result = run_training(tc, ds, log, "");
    train::save_checkpoint(result.model, checkpoint_info(result), config.out / "checkpoint.txt");
    train::write_history_csv(result.history, tc.model.variant, config.out / "history.csv");
    const auto val = eval::evaluate(result.model, ds, eval::Split::kValidation, config.ks, tc.workers);
    eval::write_report_json(val, "val", config.out / "metrics_val.json");
    log << "best epoch " << result.best_epoch << " of " << result.history.size()
        << (result.stopped_early ? " (early stop)" : "") << ", val ndcg@10 " << result.best_ndcg10 << '\n';
    return kExitOk;
}

int cmd_eval(const RunConfig& config, std::ostream& log) {
    const auto ds = load_dataset(config);
    const auto split = eval::parse_split(config.split);
    eval::MetricsReport report;
    if (config.checkpoint == "popularity") {
        report = eval::evaluate_popularity(ds, split, config.ks);
    } else {
        if (config.checkpoint.empty()) throw ConfigError("eval.checkpoint is not set");
        const auto loaded = train::load_checkpoint(config.checkpoint);
        if (loaded.model.num_items != ds.catalog.item_count() ||
            loaded.model.num_categories != ds.catalog.category_count()) {
            throw DataError("checkpoint expects " + std::to_string(loaded.model.num_items) + " items and " +
                            std::to_string(loaded.model.num_categories) + " categories, dataset has " +
                            std::to_string(ds.catalog.item_count()) + " and " +
                            std::to_string(ds.catalog.category_count()));
        }
        report = eval::evaluate(loaded.model, ds, split, config.ks, worker_count());
    }
    prepare_out(config);
    OutputLock lock(config.out);
    write_config(config, config.out / "config.txt");
    eval::write_report_json(report, config.split, config.out / ("metrics_" + config.split + ".json"));
    eval::write_report_csv(report, config.out / ("metrics_" + config.split + ".csv"));
    const auto cols = report.column_names();
    for (std::size_t i = 0; i < cols.size(); ++i) log << cols[i] << ' ' << num(report.mean[i]) << '\n';
    return kExitOk;
}

int cmd_ablate(const RunConfig& config, std::ostream& log) {
    const auto ds = load_dataset(config);
    prepare_out(config);
    OutputLock lock(config.out);
    write_config(config, config.out / "config.txt");
    const auto split = eval::parse_split(config.split);
    const auto cols = eval::metric_columns(config.ks);
    const train::Variant variants[] = {train::Variant::kFull, train::Variant::kWithoutDD, train::Variant::kWithoutSD,
                                       train::Variant::kWithoutRD};
    std::ofstream runs(config.out / "ablation_runs.csv", std::ios::binary);
    std::ofstream table(config.out / "ablation.csv", std::ios::binary);
    if (!runs || !table) throw DataError("cannot write ablation outputs in " + config.out.string());
    runs << "variant,seed";
    table << "variant";
    for (const auto& c : cols) {
        runs << ',' << c;
        table << ',' << c;
    }
    runs << '\n';
    table << '\n';
    for (auto v : variants) {
        std::vector<double> mean(cols.size(), 0.0);
        const std::string name = train::variant_name(v);
        for (std::uint64_t seed : config.ablate_seeds) {
            auto tc = train_config(config);
            tc.model.variant = v;
            tc.seed = seed;
            const auto result = run_training(tc, ds, log, name + " seed " + std::to_string(seed) + " ");
            const auto dir = config.out / (name + "_seed" + std::to_string(seed));
            fs::create_directories(dir);
            train::write_history_csv(result.history, v, dir / "history.csv");
            const auto report = eval::evaluate(result.model, ds, split, config.ks, tc.workers);
            eval::write_report_json(report, config.split, dir / ("metrics_" + config.split + ".json"));
            runs << name << ',' << seed;
            for (std::size_t i = 0; i < cols.size(); ++i) {
                runs << ',' << num(report.mean[i]);
                mean[i] += report.mean[i] / static_cast<double>(config.ablate_seeds.size());
            }
            runs << '\n';
        }
        table << name;
        for (double m : mean) table << ',' << num(m);
        table << '\n';
        log << std::left << std::setw(7) << name;
        for (std::size_t i = 0; i < cols.size(); ++i) log << ' ' << cols[i] << '=' << std::setprecision(4) << mean[i];
        log << '\n';
    }
    return kExitOk;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& log) {
    const auto report = train::run_grad_battery(config.seed, 100);
    for (const auto& e : report.entries) {
        log << (e.report.passed() ? "PASS " : "FAIL ") << std::left << std::setw(34) << e.name << " trials=" << e.trials
            << " entries=" << e.report.entries_checked << " max_err=" << std::scientific << std::setprecision(2)
            << e.report.max_error << std::defaultfloat << '\n';
        if (!e.report.passed()) log << "  " << e.report.summary() << '\n';
    }
    log << "gradcheck " << (report.passed() ? "passed" : "FAILED") << " in " << std::fixed << std::setprecision(1)
        << report.seconds << " s" << std::defaultfloat << '\n';
    return report.passed() ? kExitOk : kExitNumerical;
}

int cmd_export_plots(const RunConfig& config, const std::vector<fs::path>& inputs, std::ostream& log) {
    if (inputs.empty()) throw ConfigError("export-plots needs at least one history or report file");
    std::ostringstream rows;
    std::size_t count = 0;
    auto emit = [&](const std::string& run, const std::string& variant, const std::string& epoch,
                    const std::string& column, const std::string& value) {
        const auto [metric, k] = split_metric(column);
        rows << run << ',' << variant << ',' << epoch << ',' << metric << ',' << (k ? std::to_string(k) : "") << ','
             << value << '\n';
        ++count;
    };
    for (const auto& path : inputs) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot read " + path.string());
        const auto dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
        const std::string run = fs::absolute(dir).lexically_normal().filename().string();
        if (path.extension() == ".json") {
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw DataError(path.string() + ": " + e.what());
            }
            if (!j.contains("metrics")) throw DataError(path.string() + ": no metrics object");
            const std::string variant = variant_of_dir(dir);
            for (const auto& [k, v] : j["metrics"].items()) emit(run, variant, "", k, num(v.get<double>()));
            continue;
        }
        std::string header;
        std::getline(in, header);
        const auto cols = split_csv(header);
        if (cols.empty()) throw DataError(path.string() + ": empty file");
        std::string line;
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto cells = split_csv(line);
            if (cells.size() != cols.size()) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                std::to_string(cols.size()) + " fields");
            }
            if (cols[0] == "epoch") {
                const std::string variant = variant_of_dir(dir);
                for (std::size_t i = 1; i < cols.size(); ++i) emit(run, variant, cells[0], cols[i], cells[i]);
            } else if (cols[0] == "variant") {
                for (std::size_t i = 1; i < cols.size(); ++i) emit(run, cells[0], "", cols[i], cells[i]);
            } else {
                throw DataError(path.string() + ": not a history, ablation table or report file");
            }
        }
    }
    prepare_out(config);
    OutputLock lock(config.out);
    std::ofstream out(config.out / "plot_data.csv", std::ios::binary);
    if (!out) throw DataError("cannot write plot_data.csv");
    out << "run,variant,epoch,metric,k,value\n" << rows.str();
    log << "wrote " << count << " rows to " << (config.out / "plot_data.csv").string() << '\n';
    return kExitOk;
}

}  // namespace ddsrec::cli
