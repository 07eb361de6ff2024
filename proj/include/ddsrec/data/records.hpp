#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace ddsrec::data {

/// One interaction event from a log.
struct InteractionRecord {
    std::string user;
    std::string item;
    std::int64_t timestamp = 0;
    std::vector<std::string> categories;  // non-empty after ingestion

    friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

/// Column layout of a delimiter-separated interaction log. With a header the
/// named columns are looked up; without one the positional indices are used.
struct FieldMapping {
    char delimiter = '\t';
    char category_separator = '|';
    bool has_header = true;
    std::string user_column = "user";
    std::string item_column = "item";
    std::string timestamp_column = "timestamp";
    std::string categories_column = "categories";
    std::size_t user_index = 0;
    std::size_t item_index = 1;
    std::size_t timestamp_index = 2;
    std::size_t categories_index = 3;
};

struct LoadResult {
    std::vector<InteractionRecord> records;
    std::size_t skipped = 0;
    std::vector<std::size_t> skipped_lines;  // 1-based line numbers
};

/// Parses an interaction log. Malformed rows are skipped and counted; a
/// missing file or zero parseable rows raises DataError.
LoadResult load_interactions(const std::filesystem::path& path, const FieldMapping& format = {});

/// Item and category vocabularies. Indices follow sorted token order.
class Catalog {
public:
    Catalog() = default;
    /// `item_categories[i]` lists the category indices of item i (non-empty).
    Catalog(std::vector<std::string> item_tokens, std::vector<std::string> category_tokens,
            std::vector<std::vector<std::size_t>> item_categories);

    /// Union of each item's categories across all of its records.
    static Catalog from_records(const std::vector<InteractionRecord>& records);

    std::size_t item_count() const noexcept { return item_tokens_.size(); }
    std::size_t category_count() const noexcept { return category_tokens_.size(); }
    const std::string& item_token(std::size_t i) const { return item_tokens_.at(i); }
    const std::string& category_token(std::size_t c) const { return category_tokens_.at(c); }
    const std::vector<std::string>& item_tokens() const noexcept { return item_tokens_; }
    const std::vector<std::string>& category_tokens() const noexcept { return category_tokens_; }
    /// Throws DataError for an unknown token.
    std::size_t item_index(const std::string& token) const;
    bool has_item(const std::string& token) const { return item_lookup_.contains(token); }
    /// Sorted category indices of item i; throws std::out_of_range for unknown items.
    const std::vector<std::size_t>& categories_of(std::size_t item) const { return item_categories_.at(item); }
    /// Multi-hot vector of length category_count().
    std::vector<bool> multi_hot(std::size_t item) const;

private:
    std::vector<std::string> item_tokens_;
    std::vector<std::string> category_tokens_;
    std::vector<std::vector<std::size_t>> item_categories_;
    std::unordered_map<std::string, std::size_t> item_lookup_;
};

}  // namespace ddsrec::data
