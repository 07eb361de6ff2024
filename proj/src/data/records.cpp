#include "ddsrec/data/records.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ddsrec/errors.hpp"

namespace ddsrec::data {
namespace {

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == name) return i;
    }
    throw DataError("header has no column named '" + name + "'");
}

}  // namespace

LoadResult load_interactions(const std::filesystem::path& path, const FieldMapping& format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open interaction file: " + path.string());

    std::size_t ui = format.user_index, ii = format.item_index, ti = format.timestamp_index,
                ci = format.categories_index;
    LoadResult result;
    std::string line;
    std::size_t line_no = 0;
    if (format.has_header) {
        if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto header = split(line, format.delimiter);
        try {
            ui = column_of(header, format.user_column);
            ii = column_of(header, format.item_column);
            ti = column_of(header, format.timestamp_column);
            ci = column_of(header, format.categories_column);
        } catch (const DataError& e) {
            throw DataError(path.string() + ":1: " + e.what());
        }
    }
    const std::size_t needed = std::max({ui, ii, ti, ci}) + 1;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split(line, format.delimiter);
        InteractionRecord rec;
        bool ok = fields.size() >= needed;
        if (ok) {
            rec.user = trim(fields[ui]);
            rec.item = trim(fields[ii]);
            const std::string ts = trim(fields[ti]);
            const auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), rec.timestamp);
            ok = !rec.user.empty() && !rec.item.empty() && ec == std::errc() && ptr == ts.data() + ts.size() &&
                 !ts.empty();
            if (ok) {
                std::set<std::string> cats;
                for (auto& c : split(fields[ci], format.category_separator)) {
                    c = trim(std::move(c));
                    if (!c.empty()) cats.insert(c);
                }
                rec.categories.assign(cats.begin(), cats.end());
                ok = !rec.categories.empty();
            }
        }
        if (ok) {
            result.records.push_back(std::move(rec));
        } else {
            ++result.skipped;
            result.skipped_lines.push_back(line_no);
        }
    }
    if (result.records.empty()) {
        std::string msg = path.string() + ": no parseable rows";
        if (result.skipped > 0) {
            msg += " (" + std::to_string(result.skipped) + " skipped, first at line " +
                   std::to_string(result.skipped_lines.front()) + ")";
        }
        throw DataError(msg);
    }
    return result;
}

Catalog::Catalog(std::vector<std::string> item_tokens, std::vector<std::string> category_tokens,
                 std::vector<std::vector<std::size_t>> item_categories)
    : item_tokens_(std::move(item_tokens)),
      category_tokens_(std::move(category_tokens)),
      item_categories_(std::move(item_categories)) {
    if (item_categories_.size() != item_tokens_.size()) {
        throw DataError("catalog: category lists do not match item count");
    }
    for (std::size_t i = 0; i < item_tokens_.size(); ++i) {
        auto& cats = item_categories_[i];
        std::sort(cats.begin(), cats.end());
        cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
        if (cats.empty()) throw DataError("catalog: item '" + item_tokens_[i] + "' has no category");
        if (cats.back() >= category_tokens_.size()) {
            throw DataError("catalog: item '" + item_tokens_[i] + "' references unknown category");
        }
        if (!item_lookup_.emplace(item_tokens_[i], i).second) {
            throw DataError("catalog: duplicate item token '" + item_tokens_[i] + "'");
        }
    }
}

Catalog Catalog::from_records(const std::vector<InteractionRecord>& records) {
    std::map<std::string, std::set<std::string>> item_cats;
    std::set<std::string> all_cats;
    for (const auto& r : records) {
        auto& s = item_cats[r.item];
        for (const auto& c : r.categories) {
            s.insert(c);
            all_cats.insert(c);
        }
    }
    std::vector<std::string> cat_tokens(all_cats.begin(), all_cats.end());
    std::map<std::string, std::size_t> cat_index;
    for (std::size_t i = 0; i < cat_tokens.size(); ++i) cat_index[cat_tokens[i]] = i;
    std::vector<std::string> items;
    std::vector<std::vector<std::size_t>> cats;
    for (const auto& [item, cs] : item_cats) {
        items.push_back(item);
        std::vector<std::size_t> idx;
        for (const auto& c : cs) idx.push_back(cat_index.at(c));
        cats.push_back(std::move(idx));
    }
    return Catalog(std::move(items), std::move(cat_tokens), std::move(cats));
}

std::size_t Catalog::item_index(const std::string& token) const {
    auto it = item_lookup_.find(token);
    if (it == item_lookup_.end()) throw DataError("unknown item token '" + token + "'");
    return it->second;
}

std::vector<bool> Catalog::multi_hot(std::size_t item) const {
    std::vector<bool> bits(category_count(), false);
    for (std::size_t c : categories_of(item)) bits[c] = true;
    return bits;
}

}  // namespace ddsrec::data
