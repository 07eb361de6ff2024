#include "ddsrec/train/checkpoint.hpp"
#include "ddsrec/numerics/format.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ddsrec/errors.hpp"
#include "ddsrec/random.hpp"

namespace ddsrec::train {
namespace {

constexpr int kVersion = 1;

std::string num(double v) { return format_double(v); }

std::size_t parse_size(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || x < 0) throw std::invalid_argument(key + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(x);
}

double parse_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size()) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
    return x;
}

std::string hex(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> model_config_entries(const ModelConfig& c) {
    const auto& t = c.transformer;
    return {
        {"model.variant", variant_name(c.variant)},
        {"model.d", std::to_string(t.d)},
        {"model.blocks", std::to_string(t.blocks)},
        {"model.heads", std::to_string(t.heads)},
        {"model.ffn_mult", std::to_string(t.ffn_mult)},
        {"model.dropout", num(t.dropout)},
        {"model.emb_dropout", num(t.emb_dropout)},
        {"model.max_len", std::to_string(t.max_len)},
        {"mask.theta_m", num(c.mask.theta_m)},
        {"mask.proxy_window", std::to_string(c.mask.proxy_window)},
        {"adv.lambda1", num(c.lambda1)},
        {"adv.lambda2", num(c.lambda2)},
    };
}

bool set_model_config(ModelConfig& c, const std::string& key, const std::string& value) {
    auto& t = c.transformer;
    if (key == "model.variant") c.variant = parse_variant(value);
    else if (key == "model.d") t.d = parse_size(key, value);
    else if (key == "model.blocks") t.blocks = parse_size(key, value);
    else if (key == "model.heads") t.heads = parse_size(key, value);
    else if (key == "model.ffn_mult") t.ffn_mult = parse_size(key, value);
    else if (key == "model.dropout") t.dropout = parse_real(key, value);
    else if (key == "model.emb_dropout") t.emb_dropout = parse_real(key, value);
    else if (key == "model.max_len") t.max_len = parse_size(key, value);
    else if (key == "mask.theta_m") c.mask.theta_m = parse_real(key, value);
    else if (key == "mask.proxy_window") c.mask.proxy_window = parse_size(key, value);
    else if (key == "adv.lambda1") c.lambda1 = parse_real(key, value);
    else if (key == "adv.lambda2") c.lambda2 = parse_real(key, value);
    else return false;
    return true;
}

std::uint64_t config_hash(const ModelConfig& config) {
    std::string s;
    for (const auto& [k, v] : model_config_entries(config)) s += k + "=" + v + "\n";
    return fnv1a(s);
}

void save_checkpoint(const ModelParams& model, const CheckpointInfo& info, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << "ddsrec-checkpoint " << kVersion << '\n';
    out << "config_hash " << hex(config_hash(model.config)) << '\n';
    out << "items " << model.num_items << '\n';
    out << "categories " << model.num_categories << '\n';
    out << "epoch " << info.epoch << '\n';
    for (const auto& [k, v] : model_config_entries(model.config)) out << "config " << k << ' ' << v << '\n';
    for (const auto& [k, v] : info.validation) out << "val " << k << ' ' << num(v) << '\n';
    out << std::hexfloat;
    for (const auto& p : model.store.all()) {
        out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
        for (std::size_t r = 0; r < p.value.rows(); ++r) {
            const auto row = p.value.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << row[c];
            out << '\n';
        }
    }
    out << "end\n";
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    const std::string where = path.string();
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++lineno;
        return true;
    };
    auto fail = [&](const std::string& what) -> DataError {
        return DataError(where + ":" + std::to_string(lineno) + ": " + what);
    };

    if (!next() || line != "ddsrec-checkpoint " + std::to_string(kVersion)) throw fail("not a version 1 checkpoint");
    ModelConfig cfg;
    std::string stored_hash;
    std::size_t items = 0, categories = 0;
    CheckpointInfo info;
    // Header up to the first parameter block.
    while (next()) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "param") break;
        std::string a, b;
        ls >> a;
        try {
            if (tag == "config_hash") stored_hash = a;
            else if (tag == "items") items = parse_size(tag, a);
            else if (tag == "categories") categories = parse_size(tag, a);
            else if (tag == "epoch") info.epoch = parse_size(tag, a);
            else if (tag == "config") {
                ls >> b;
                if (!set_model_config(cfg, a, b)) throw fail("unknown config key " + a);
            } else if (tag == "val") {
                ls >> b;
                info.validation[a] = parse_real(a, b);
            } else {
                throw fail("unexpected line '" + line + "'");
            }
        } catch (const std::invalid_argument& e) {
            throw fail(e.what());
        }
    }
    if (stored_hash != hex(config_hash(cfg))) throw fail("config hash mismatch");

    ModelParams model;
    try {
        model = init_model(cfg, items, categories, 0);
    } catch (const std::invalid_argument& e) {
        throw fail(std::string("invalid stored config: ") + e.what());
    }
    for (auto& p : model.store.all()) {
        std::istringstream ls(line);
        std::string tag, name;
        std::size_t rows = 0, cols = 0;
        ls >> tag >> name >> rows >> cols;
        if (tag != "param") throw fail("expected parameter " + p.name);
        if (name != p.name) throw fail("parameter " + name + " where " + p.name + " was expected");
        if (rows != p.value.rows() || cols != p.value.cols()) {
            throw fail("parameter " + name + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                       ", model expects " + shape_string(p.value));
        }
        for (std::size_t r = 0; r < rows; ++r) {
            if (!next()) throw fail("truncated parameter " + name);
            const char* s = line.c_str();
            for (std::size_t c = 0; c < cols; ++c) {
                char* end = nullptr;
                const double v = std::strtod(s, &end);
                if (end == s) throw fail("bad value in parameter " + name);
                p.value(r, c) = v;
                s = end;
            }
        }
        if (!next()) throw fail("truncated checkpoint");
    }
    if (line != "end") throw fail("extra data after the last parameter");
    return {std::move(model), std::move(info)};
}

}  // namespace ddsrec::train
