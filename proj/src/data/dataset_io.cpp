#include "ddsrec/data/dataset_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "ddsrec/errors.hpp"

namespace ddsrec::data {
namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("missing dataset file " + p.string());
    return in;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) out.push_back(field);
    if (!line.empty() && line.back() == '\t') out.emplace_back();
    return out;
}

std::size_t parse_index(const std::string& s, const std::filesystem::path& file, std::size_t line) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw DataError(file.string() + ":" + std::to_string(line) + ": bad index '" + s + "'");
    }
}

}  // namespace

void write_dataset_dir(const SplitDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& cat = ds.catalog;
    {
        auto out = open_out(dir / "categories.tsv");
        out << "# category_index\tcategory_token\n";
        for (std::size_t c = 0; c < cat.category_count(); ++c) out << c << '\t' << cat.category_token(c) << '\n';
    }
    {
        auto out = open_out(dir / "catalog.tsv");
        out << "# item_index\titem_token\tcategory_bits\n";
        for (std::size_t i = 0; i < cat.item_count(); ++i) {
            out << i << '\t' << cat.item_token(i) << '\t';
            for (bool b : cat.multi_hot(i)) out << (b ? '1' : '0');
            out << '\n';
        }
    }
    {
        auto out = open_out(dir / "sequences.tsv");
        out << "# user\tinteractions\ttrain\tvalidation\ttest\n";
        for (const auto& u : ds.users) {
            out << u.user << '\t' << u.interactions << '\t';
            for (std::size_t k = 0; k < u.train.size(); ++k) out << (k ? " " : "") << u.train[k];
            out << '\t' << u.validation << '\t' << u.test << '\n';
        }
    }
    {
        const auto st = dataset_stats(ds);
        nlohmann::ordered_json j;
        j["users"] = st.users;
        j["items"] = st.items;
        j["interactions"] = st.interactions;
        j["categories"] = st.categories;
        j["density"] = st.density;
        j["max_len"] = ds.max_len;
        j["dropped_users"] = ds.dropped_users.size();
        auto out = open_out(dir / "stats.json");
        out << j.dump(2) << '\n';
    }
}

SplitDataset read_dataset_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
    std::string line;

    std::vector<std::string> categories;
    {
        const auto path = dir / "categories.tsv";
        auto in = open_in(path);
        std::size_t ln = 0;
        while (std::getline(in, line)) {
            ++ln;
            if (line.empty() || line[0] == '#') continue;
            const auto f = split_tabs(line);
            if (f.size() != 2 || parse_index(f[0], path, ln) != categories.size()) {
                throw DataError(path.string() + ":" + std::to_string(ln) + ": malformed category line");
            }
            categories.push_back(f[1]);
        }
    }
    std::vector<std::string> items;
    std::vector<std::vector<std::size_t>> item_cats;
    {
        const auto path = dir / "catalog.tsv";
        auto in = open_in(path);
        std::size_t ln = 0;
        while (std::getline(in, line)) {
            ++ln;
            if (line.empty() || line[0] == '#') continue;
            const auto f = split_tabs(line);
            if (f.size() != 3 || parse_index(f[0], path, ln) != items.size() || f[2].size() != categories.size()) {
                throw DataError(path.string() + ":" + std::to_string(ln) + ": malformed catalog line");
            }
            items.push_back(f[1]);
            std::vector<std::size_t> cs;
            for (std::size_t c = 0; c < f[2].size(); ++c) {
                if (f[2][c] == '1') cs.push_back(c);
                else if (f[2][c] != '0') throw DataError(path.string() + ":" + std::to_string(ln) + ": bad category bits");
            }
            item_cats.push_back(std::move(cs));
        }
    }
    SplitDataset ds;
    ds.catalog = Catalog(std::move(items), std::move(categories), std::move(item_cats));
    {
        const auto path = dir / "sequences.tsv";
        auto in = open_in(path);
        std::size_t ln = 0;
        while (std::getline(in, line)) {
            ++ln;
            if (line.empty() || line[0] == '#') continue;
            const auto f = split_tabs(line);
            if (f.size() != 5) throw DataError(path.string() + ":" + std::to_string(ln) + ": expected 5 fields");
            UserSplit u;
            u.user = f[0];
            u.interactions = parse_index(f[1], path, ln);
            std::stringstream ss(f[2]);
            std::string tok;
            while (ss >> tok) u.train.push_back(parse_index(tok, path, ln));
            u.validation = parse_index(f[3], path, ln);
            u.test = parse_index(f[4], path, ln);
            const std::size_t n = ds.catalog.item_count();
            bool ok = u.validation < n && u.test < n && !u.train.empty();
            for (std::size_t it : u.train) ok = ok && it < n;
            if (!ok) throw DataError(path.string() + ":" + std::to_string(ln) + ": item index out of range");
            ds.users.push_back(std::move(u));
        }
    }
    {
        const auto path = dir / "stats.json";
        auto in = open_in(path);
        try {
            const auto j = nlohmann::json::parse(in);
            ds.max_len = j.at("max_len").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    }
    if (ds.users.empty()) throw DataError(dir.string() + ": dataset has no users");
    return ds;
}

}  // namespace ddsrec::data
