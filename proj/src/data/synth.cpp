#include "ddsrec/data/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "ddsrec/errors.hpp"
#include "ddsrec/random.hpp"

namespace ddsrec::data {
namespace {

std::string padded(char prefix, std::size_t value, std::size_t width) {
    std::string digits = std::to_string(value);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return std::string(1, prefix) + digits;
}

std::size_t width_for(std::size_t n) { return std::to_string(n > 0 ? n - 1 : 0).size(); }

void validate(const SynthSpec& s) {
    auto fail = [](const std::string& why) { throw DataError("infeasible synthetic spec: " + why); };
    if (s.users == 0) fail("users must be >= 1");
    if (s.categories == 0) fail("categories must be >= 1");
    if (s.items < s.categories) fail("items must be >= categories");
    if (s.interests_per_user == 0) fail("interests_per_user must be >= 1");
    if (s.interests_per_user > s.categories) fail("interests_per_user exceeds categories");
    if (!(s.noise_rate >= 0.0 && s.noise_rate <= 1.0)) fail("noise_rate must lie in [0, 1]");
    if (s.min_events == 0 || s.min_events > s.max_events) fail("need 1 <= min_events <= max_events");
    if (!(s.dominant_weight > 0.0 && s.dominant_weight <= 1.0)) fail("dominant_weight must lie in (0, 1]");
}

}  // namespace

SynthDataset synthesize_dataset(const SynthSpec& spec) {
    validate(spec);
    SynthDataset out;
    out.item_category.resize(spec.items);
    std::vector<std::vector<std::size_t>> block(spec.categories);
    for (std::size_t i = 0; i < spec.items; ++i) {
        const std::size_t c = i * spec.categories / spec.items;
        out.item_category[i] = c;
        block[c].push_back(i);
    }
    const std::size_t iw = width_for(spec.items), uw = width_for(spec.users), cw = width_for(spec.categories);

    std::vector<std::size_t> all_categories(spec.categories);
    std::iota(all_categories.begin(), all_categories.end(), std::size_t{0});
    std::vector<double> weights(spec.interests_per_user);
    if (spec.interests_per_user == 1) {
        weights[0] = 1.0;
    } else {
        weights[0] = spec.dominant_weight;
        for (std::size_t k = 1; k < weights.size(); ++k) {
            weights[k] = (1.0 - spec.dominant_weight) / static_cast<double>(spec.interests_per_user - 1);
        }
    }

    for (std::size_t u = 0; u < spec.users; ++u) {
        auto rng = make_rng(spec.seed, "synth.user", u);
        std::vector<std::size_t> cats = all_categories;
        std::shuffle(cats.begin(), cats.end(), rng);
        cats.resize(spec.interests_per_user);
        std::vector<std::size_t> cursor(spec.interests_per_user);
        for (std::size_t k = 0; k < cursor.size(); ++k) {
            cursor[k] = std::uniform_int_distribution<std::size_t>(0, block[cats[k]].size() - 1)(rng);
        }
        const std::size_t events =
            std::uniform_int_distribution<std::size_t>(spec.min_events, spec.max_events)(rng);
        std::bernoulli_distribution noise(spec.noise_rate);
        std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
        std::uniform_int_distribution<std::size_t> any_item(0, spec.items - 1);
        const std::string user = padded('u', u, uw);
        for (std::size_t e = 0; e < events; ++e) {
            std::size_t item;
            int label;
            if (noise(rng)) {
                item = any_item(rng);
                label = kNoiseLabel;
            } else {
                const std::size_t k = pick(rng);
                const auto& items = block[cats[k]];
                item = items[cursor[k]];
                cursor[k] = (cursor[k] + 1) % items.size();
                label = static_cast<int>(k);
            }
            out.records.push_back(InteractionRecord{
                user, padded('i', item, iw), static_cast<std::int64_t>(e), {padded('c', out.item_category[item], cw)}});
            out.interest_labels.push_back(label);
        }
        out.user_interests.push_back(std::move(cats));
    }
    return out;
}

}  // namespace ddsrec::data
