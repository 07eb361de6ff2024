#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"

#include "json.hpp"

#include "common/metric_oracle.hpp"
#include "common/toy_data.hpp"
#include "ddsrec/errors.hpp"
#include "ddsrec/eval/evaluate.hpp"
#include "ddsrec/eval/metrics.hpp"
#include "ddsrec/train/model.hpp"

using namespace ddsrec;
using namespace ddsrec::eval;

namespace {

data::Catalog single_category_catalog(std::size_t items, std::size_t categories) {
    std::vector<std::string> it, ct;
    std::vector<std::vector<std::size_t>> ic;
    for (std::size_t i = 0; i < items; ++i) {
        it.push_back("i" + std::to_string(i));
        ic.push_back({i % categories});
    }
    for (std::size_t c = 0; c < categories; ++c) ct.push_back("c" + std::to_string(c));
    return data::Catalog(it, ct, ic);
}

}  // namespace

TEST_CASE("topk examples") {
    const std::vector<double> s = {3, 1, 2};
    CHECK(topk(s, 2) == RankedList{0, 2});
    const std::vector<double> tie = {1, 5, 5, 0, 5};
    CHECK(topk(tie, 2) == RankedList{1, 2});
    CHECK(topk(tie, 3, {false, true, false, false, false}) == RankedList{2, 4, 0});
    CHECK(topk(s, 10).size() == 3);
    CHECK(topk(s, 5, {true, true, true}).empty());
}

TEST_CASE("topk vs sort oracle, monotone transform invariance") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng() % 60, k = 1 + rng() % 25;
        std::vector<double> s(n);
        for (auto& v : s) v = static_cast<double>(rng() % 7) - 3.0;  // many ties
        std::vector<bool> ex(n);
        for (std::size_t i = 0; i < n; ++i) ex[i] = rng() % 4 == 0;
        const auto got = topk(s, k, ex);
        CHECK(got == oracle::topk(s, k, ex));
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(0.5 * s[i]) + 2.0;
        CHECK(topk(t, k, ex) == got);
    }
}

TEST_CASE("recall and ndcg examples") {
    const RankedList l = {4, 7, 9, 1};
    CHECK(recall_at_k(l, 4) == 1.0);
    CHECK(recall_at_k(l, 5) == 0.0);
    CHECK(ndcg_at_k(l, 4) == 1.0);
    CHECK(ndcg_at_k(l, 9) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ndcg_at_k(l, 5) == 0.0);
}

TEST_CASE("ce and cc examples") {
    const auto cat = single_category_catalog(40, 31);
    CHECK(ce_at_k({0, 31}, cat) == 0.0);  // both category 0
    CHECK(ce_at_k({0, 1, 2, 3, 4}, cat) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
    CHECK(ce_at_k({0, 1, 2, 3, 4}, cat, 2.0) == doctest::Approx(std::log2(5.0)).epsilon(1e-14));
    CHECK(cc_at_k({0, 1, 2, 3, 31}, cat) == doctest::Approx(4.0 / 31.0).epsilon(1e-15));
    CHECK(cc_at_k({0, 31}, cat) == doctest::Approx(1.0 / 31.0));
    RankedList all(31);
    std::iota(all.begin(), all.end(), 0);
    CHECK(cc_at_k(all, cat) == 1.0);
    CHECK_THROWS_AS(ce_at_k({99}, cat), DataError);
    CHECK_THROWS_AS(cc_at_k({99}, cat), DataError);

    // an item in two categories splits its weight
    const data::Catalog multi({"a", "b"}, {"x", "y"}, {{0, 1}, {0}});
    const double p = 0.75, q = 0.25;
    CHECK(ce_at_k({0, 1}, multi) == doctest::Approx(-(p * std::log(p) + q * std::log(q))).epsilon(1e-14));
}

TEST_CASE("metrics vs brute-force oracle, bounds and monotonicity") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t items = 5 + rng() % 50, cats = 1 + rng() % 10;
        const auto cat = oracle::random_catalog(items, cats, rng);
        std::vector<double> s(items);
        std::normal_distribution<double> n;
        for (auto& v : s) v = n(rng);
        const std::size_t target = rng() % items;
        double prev_recall = 0.0, prev_cc = 0.0;
        for (std::size_t k : {5, 10, 20}) {
            const auto l = topk(s, k);
            CHECK(l == oracle::topk(s, k, {}));
            CHECK(recall_at_k(l, target) == oracle::recall(l, target));
            CHECK(std::abs(ndcg_at_k(l, target) - oracle::ndcg(l, target)) <= 1e-12);
            const double ce = ce_at_k(l, cat);
            CHECK(std::abs(ce - oracle::ce(l, cat)) <= 1e-12);
            CHECK(std::abs(cc_at_k(l, cat) - oracle::cc(l, cat)) <= 1e-12);
            CHECK(ce >= 0.0);
            // multi-category items can cover more than K categories
            CHECK(ce <= std::log(cc_at_k(l, cat) * static_cast<double>(cats)) + 1e-12);
            const auto single = single_category_catalog(items, cats);
            CHECK(ce_at_k(l, single) <= std::log(static_cast<double>(std::min(k, cats))) + 1e-12);
            CHECK(recall_at_k(l, target) >= prev_recall);
            CHECK(cc_at_k(l, cat) >= prev_cc);
            prev_recall = recall_at_k(l, target);
            prev_cc = cc_at_k(l, cat);
        }
    }
}

TEST_CASE("make_eval_case") {
    data::UserSplit u;
    u.train = {1, 2, 3};
    u.validation = 4;
    u.test = 5;
    const auto v = make_eval_case(u, Split::kValidation, 50);
    CHECK(v.input == std::vector<std::size_t>{1, 2, 3});
    CHECK(v.target == 4);
    CHECK(v.excluded == std::vector<std::size_t>{1, 2, 3});
    const auto t = make_eval_case(u, Split::kTest, 3);
    CHECK(t.input == std::vector<std::size_t>{2, 3, 4});
    CHECK(t.target == 5);
    CHECK(std::count(t.excluded.begin(), t.excluded.end(), 1) == 1);
    CHECK(std::count(t.excluded.begin(), t.excluded.end(), 4) == 1);
    CHECK(parse_split("val") == Split::kValidation);
    CHECK(parse_split("test") == Split::kTest);
    CHECK_THROWS_AS(parse_split("train"), std::invalid_argument);
}

TEST_CASE("evaluate_scores: hand count, per-user mean identity") {
    auto ds = toy::memorization_set(6, 10, 5, 2);
    // scorer prefers the lowest item index
    const Scorer lowest = [&](const EvalCase&) {
        std::vector<double> s(10);
        for (std::size_t i = 0; i < 10; ++i) s[i] = -static_cast<double>(i);
        return s;
    };
    const std::vector<std::size_t> ks = {1, 5};
    const auto r = evaluate_scores(ds, Split::kTest, ks, lowest, 3);
    double hits = 0;
    for (const auto& u : ds.users) {
        const auto c = make_eval_case(u, Split::kTest, ds.max_len);
        std::vector<bool> ex(10);
        for (auto i : c.excluded) ex[i] = true;
        hits += oracle::recall(oracle::topk(lowest(c), 5, ex), c.target);
    }
    CHECK(r.get("recall@5") == doctest::Approx(hits / 6.0).epsilon(1e-15));
    const auto cols = r.column_names();
    CHECK(cols.front() == "recall@1");
    CHECK(cols.back() == "cc@5");
    for (std::size_t c = 0; c < cols.size(); ++c) {
        double sum = 0;
        for (const auto& row : r.per_user) sum += row[c];
        CHECK(r.mean[c] == doctest::Approx(sum / 6.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(r.get("mrr@5"), std::out_of_range);
}

TEST_CASE("untrained model is a random ranker") {
    // 400 users over 100 items, one category each
    std::mt19937_64 rng(5);
    data::SplitDataset ds;
    ds.catalog = single_category_catalog(100, 5);
    for (int u = 0; u < 400; ++u) {
        data::UserSplit s;
        s.user = "u" + std::to_string(u);
        for (int j = 0; j < 8; ++j) s.train.push_back(rng() % 100);
        s.validation = rng() % 100;
        s.test = rng() % 100;
        ds.users.push_back(s);
    }
    train::ModelConfig cfg;
    cfg.transformer.d = 16;
    cfg.transformer.max_len = 50;
    const auto model = train::init_model(cfg, 100, 5, 11);
    const auto a = evaluate(model, ds, Split::kValidation);
    const auto b = evaluate(model, ds, Split::kValidation, kDefaultKs, 2);
    CHECK(a.mean == b.mean);
    CHECK(a.per_user == b.per_user);
    for (std::size_t k : kDefaultKs) {
        // about 8 train items are excluded per user
        const double p = static_cast<double>(k) / 92.0;
        const double sigma = std::sqrt(p * (1 - p) / 400.0);
        CHECK(std::abs(a.get("recall@" + std::to_string(k)) - p) <= 3 * sigma + 0.01);
    }
}

TEST_CASE("popularity baseline and report writers") {
    auto ds = toy::memorization_set(4, 10, 6, 3);
    const auto pop = evaluate_popularity(ds, Split::kValidation);
    std::vector<double> freq(10);
    for (const auto& u : ds.users) {
        for (auto i : u.train) freq[i] += 1.0;
    }
    const auto expected = evaluate_scores(ds, Split::kValidation, kDefaultKs,
                                          [&](const EvalCase&) { return freq; });
    CHECK(pop.mean == expected.mean);

    const auto dir = std::filesystem::temp_directory_path() / "ddsrec_eval_test";
    std::filesystem::create_directories(dir);
    write_report_json(pop, "val", dir / "m.json");
    write_report_csv(pop, dir / "m.csv");
    std::ifstream js(dir / "m.json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j["split"] == "val");
    CHECK(j["users"] == 4);
    CHECK(j["metrics"].size() == 12);
    CHECK(j["metrics"]["ndcg@10"].get<double>() == pop.get("ndcg@10"));
    std::ifstream cs(dir / "m.csv");
    std::string header;
    std::getline(cs, header);
    CHECK(header.rfind("user,recall@5,recall@10,recall@20,ndcg@5", 0) == 0);
    std::size_t lines = 0;
    for (std::string line; std::getline(cs, line);) ++lines;
    CHECK(lines == 4);
    std::filesystem::remove_all(dir);
}
