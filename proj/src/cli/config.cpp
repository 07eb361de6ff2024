#include "ddsrec/cli/config.hpp"
#include "ddsrec/numerics/format.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ddsrec/train/checkpoint.hpp"

namespace ddsrec::cli {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string num(double v) { return format_double(v); }

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long x = 0;
    try {
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
        x = std::stoull(v, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

double to_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

char to_char(const std::string& key, const std::string& v) {
    if (v == "\\t" || v == "tab") return '\t';
    if (v == "comma") return ',';
    if (v.size() == 1) return v[0];
    throw ConfigError(key + ": expected a single character, got '" + v + "'");
}

std::string show_char(char c) {
    if (c == '\t') return "\\t";
    if (c == ',') return "comma";
    return std::string(1, c);
}

template <typename T>
std::vector<T> to_list(const std::string& key, const std::string& v) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(static_cast<T>(to_u64(key, trim(item))));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

template <typename T>
std::string show_list(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
    std::vector<std::pair<std::string, std::string>> e = {
        {"seed", std::to_string(seed)},
        {"out", out.string()},
        {"data.input", input.string()},
        {"data.dir", dataset_dir.string()},
        {"data.delimiter", show_char(format.delimiter)},
        {"data.category_separator", show_char(format.category_separator)},
        {"data.header", format.has_header ? "true" : "false"},
        {"data.user_column", format.user_column},
        {"data.item_column", format.item_column},
        {"data.timestamp_column", format.timestamp_column},
        {"data.categories_column", format.categories_column},
        {"data.core", std::to_string(core)},
        {"data.max_len", std::to_string(max_len)},
        {"synth.users", std::to_string(synth.users)},
        {"synth.items", std::to_string(synth.items)},
        {"synth.categories", std::to_string(synth.categories)},
        {"synth.interests", std::to_string(synth.interests_per_user)},
        {"synth.noise", num(synth.noise_rate)},
        {"synth.min_events", std::to_string(synth.min_events)},
        {"synth.max_events", std::to_string(synth.max_events)},
        {"synth.dominant_weight", num(synth.dominant_weight)},
    };
    for (auto& kv : train::model_config_entries(train.model)) e.push_back(kv);
    e.insert(e.end(), {
                          {"train.lr", num(train.adam.learning_rate)},
                          {"train.batch_size", std::to_string(train.batch_size)},
                          {"train.epochs", std::to_string(train.epochs)},
                          {"train.patience", std::to_string(train.patience)},
                          {"train.max_targets_per_user", std::to_string(train.max_targets_per_user)},
                          {"eval.ks", show_list(ks)},
                          {"eval.split", split},
                          {"eval.checkpoint", checkpoint.string()},
                          {"ablate.seeds", show_list(ablate_seeds)},
                      });
    return e;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    try {
        if (train::set_model_config(train.model, key, value)) return;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (key == "seed") seed = to_u64(key, value);
    else if (key == "out") out = value;
    else if (key == "data.input") input = value;
    else if (key == "data.dir") dataset_dir = value;
    else if (key == "data.delimiter") format.delimiter = to_char(key, value);
    else if (key == "data.category_separator") format.category_separator = to_char(key, value);
    else if (key == "data.header") format.has_header = to_bool(key, value);
    else if (key == "data.user_column") format.user_column = value;
    else if (key == "data.item_column") format.item_column = value;
    else if (key == "data.timestamp_column") format.timestamp_column = value;
    else if (key == "data.categories_column") format.categories_column = value;
    else if (key == "data.core") core = to_u64(key, value);
    else if (key == "data.max_len") max_len = to_u64(key, value);
    else if (key == "synth.users") synth.users = to_u64(key, value);
    else if (key == "synth.items") synth.items = to_u64(key, value);
    else if (key == "synth.categories") synth.categories = to_u64(key, value);
    else if (key == "synth.interests") synth.interests_per_user = to_u64(key, value);
    else if (key == "synth.noise") synth.noise_rate = to_real(key, value);
    else if (key == "synth.min_events") synth.min_events = to_u64(key, value);
    else if (key == "synth.max_events") synth.max_events = to_u64(key, value);
    else if (key == "synth.dominant_weight") synth.dominant_weight = to_real(key, value);
    else if (key == "train.lr") train.adam.learning_rate = to_real(key, value);
    else if (key == "train.batch_size") train.batch_size = to_u64(key, value);
    else if (key == "train.epochs") train.epochs = to_u64(key, value);
    else if (key == "train.patience") train.patience = to_u64(key, value);
    else if (key == "train.max_targets_per_user") train.max_targets_per_user = to_u64(key, value);
    else if (key == "eval.ks") ks = to_list<std::size_t>(key, value);
    else if (key == "eval.split") {
        if (value != "val" && value != "test") throw ConfigError("eval.split: expected val or test, got '" + value + "'");
        split = value;
    } else if (key == "eval.checkpoint") checkpoint = value;
    else if (key == "ablate.seeds") ablate_seeds = to_list<std::uint64_t>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::finalize() {
    train.seed = seed;
    synth.seed = seed;
    try {
        train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    for (std::size_t k : ks) {
        if (k == 0) throw ConfigError("eval.ks: cutoffs must be >= 1");
    }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        try {
            config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void apply_assignment(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    config.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string render_config(const RunConfig& config) {
    std::string s = "# resolved configuration\n";
    for (const auto& [k, v] : config.entries()) s += k + " = " + v + "\n";
    return s;
}

void write_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << render_config(config);
}

}  // namespace ddsrec::cli
