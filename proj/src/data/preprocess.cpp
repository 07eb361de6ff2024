#include "ddsrec/data/preprocess.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <unordered_map>

#include "ddsrec/errors.hpp"

namespace ddsrec::data {

std::vector<InteractionRecord> five_core_filter(std::vector<InteractionRecord> records, std::size_t k) {
    // Peeling: count once, then propagate removals through per-entity record lists.
    std::unordered_map<std::string, std::size_t> user_id, item_id;
    std::vector<std::size_t> rec_user(records.size()), rec_item(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        rec_user[r] = user_id.try_emplace(records[r].user, user_id.size()).first->second;
        rec_item[r] = item_id.try_emplace(records[r].item, item_id.size()).first->second;
    }
    std::vector<std::size_t> user_count(user_id.size()), item_count(item_id.size());
    std::vector<std::vector<std::size_t>> user_recs(user_id.size()), item_recs(item_id.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        ++user_count[rec_user[r]];
        ++item_count[rec_item[r]];
        user_recs[rec_user[r]].push_back(r);
        item_recs[rec_item[r]].push_back(r);
    }

    std::vector<bool> alive(records.size(), true);
    std::vector<bool> user_gone(user_id.size()), item_gone(item_id.size());
    // queue entries: (is_user, id)
    std::deque<std::pair<bool, std::size_t>> queue;
    for (std::size_t u = 0; u < user_count.size(); ++u) {
        if (user_count[u] < k) {
            user_gone[u] = true;
            queue.emplace_back(true, u);
        }
    }
    for (std::size_t i = 0; i < item_count.size(); ++i) {
        if (item_count[i] < k) {
            item_gone[i] = true;
            queue.emplace_back(false, i);
        }
    }
    while (!queue.empty()) {
        const auto [is_user, id] = queue.front();
        queue.pop_front();
        for (std::size_t r : is_user ? user_recs[id] : item_recs[id]) {
            if (!alive[r]) continue;
            alive[r] = false;
            if (is_user) {
                const std::size_t i = rec_item[r];
                if (--item_count[i] < k && !item_gone[i]) {
                    item_gone[i] = true;
                    queue.emplace_back(false, i);
                }
            } else {
                const std::size_t u = rec_user[r];
                if (--user_count[u] < k && !user_gone[u]) {
                    user_gone[u] = true;
                    queue.emplace_back(true, u);
                }
            }
        }
    }

    std::vector<InteractionRecord> out;
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (alive[r]) out.push_back(std::move(records[r]));
    }
    if (out.empty()) throw DataError("five-core filtering removed every interaction (empty dataset)");
    return out;
}

std::vector<UserHistory> build_sequences(const std::vector<InteractionRecord>& records, const Catalog& catalog) {
    std::map<std::string, std::vector<const InteractionRecord*>> by_user;
    for (const auto& r : records) by_user[r.user].push_back(&r);
    std::vector<UserHistory> out;
    out.reserve(by_user.size());
    for (auto& [user, recs] : by_user) {
        std::stable_sort(recs.begin(), recs.end(),
                         [](const InteractionRecord* a, const InteractionRecord* b) { return a->timestamp < b->timestamp; });
        UserHistory h{user, {}};
        h.items.reserve(recs.size());
        for (const auto* r : recs) h.items.push_back(catalog.item_index(r->item));
        out.push_back(std::move(h));
    }
    return out;
}

SplitDataset leave_one_out_split(const std::vector<UserHistory>& sequences, Catalog catalog, std::size_t max_len) {
    if (max_len == 0) throw DataError("leave_one_out_split: max_len must be >= 1");
    SplitDataset ds;
    ds.catalog = std::move(catalog);
    ds.max_len = max_len;
    for (const auto& h : sequences) {
        const std::size_t n = h.items.size();
        if (n < 3) {
            ds.dropped_users.push_back(h.user);
            continue;
        }
        UserSplit s;
        s.user = h.user;
        s.interactions = n;
        s.test = h.items[n - 1];
        s.validation = h.items[n - 2];
        const std::size_t train_len = n - 2;
        const std::size_t keep = std::min(train_len, max_len);
        s.train.assign(h.items.begin() + static_cast<std::ptrdiff_t>(train_len - keep),
                       h.items.begin() + static_cast<std::ptrdiff_t>(train_len));
        ds.users.push_back(std::move(s));
    }
    return ds;
}

DatasetStats dataset_stats(const SplitDataset& split) {
    DatasetStats st;
    st.users = split.users.size();
    st.items = split.catalog.item_count();
    st.categories = split.catalog.category_count();
    for (const auto& u : split.users) st.interactions += u.interactions;
    const double cells = static_cast<double>(st.users) * static_cast<double>(st.items);
    st.density = cells > 0 ? static_cast<double>(st.interactions) / cells : 0.0;
    return st;
}

}  // namespace ddsrec::data
