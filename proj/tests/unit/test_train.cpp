#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"

#include "common/toy_data.hpp"

#include "ddsrec/errors.hpp"
#include "ddsrec/numerics/ops.hpp"
#include "ddsrec/train/checkpoint.hpp"
#include "ddsrec/train/grad_battery.hpp"
#include "ddsrec/train/trainer.hpp"

using namespace ddsrec;
using namespace ddsrec::train;

namespace fs = std::filesystem;

namespace {

// Hand-built split: `users` users over `items` (a power of two) items, two categories split by
// item parity. Each user cycles through a user-specific stride.
data::SplitDataset toy_dataset(std::size_t users, std::size_t items, std::size_t length, std::uint64_t seed) {
    std::vector<std::string> tokens, cats = {"even", "odd"};
    std::vector<std::vector<std::size_t>> item_cats;
    for (std::size_t i = 0; i < items; ++i) {
        tokens.push_back("i" + std::to_string(100 + i));
        item_cats.push_back({i % 2});
    }
    data::SplitDataset ds;
    ds.catalog = data::Catalog(tokens, cats, item_cats);
    ds.max_len = length;
    std::mt19937_64 rng(seed);
    for (std::size_t u = 0; u < users; ++u) {
        // distinct starts keep one-item prefixes unambiguous for up to items/3
        // users; odd strides never revisit an item within `items` steps when items is a power of two
        const std::size_t stride = 1 + 2 * (rng() % (items / 2)), start = (u * 3) % items;
        std::vector<std::size_t> h;
        for (std::size_t j = 0; j < length + 2; ++j) h.push_back((start + j * stride) % items);
        data::UserSplit s;
        s.user = "u" + std::to_string(u);
        s.train.assign(h.begin(), h.end() - 2);
        s.validation = h[length];
        s.test = h[length + 1];
        s.interactions = h.size();
        ds.users.push_back(s);
    }
    return ds;
}

ModelConfig small_config(Variant v, std::size_t d = 8) {
    ModelConfig c;
    c.variant = v;
    c.transformer.d = d;
    c.transformer.blocks = 1;
    c.transformer.heads = 2;
    c.transformer.max_len = 12;
    c.transformer.dropout = 0.0;
    c.transformer.emb_dropout = 0.0;
    c.mask.proxy_window = 3;
    return c;
}

std::size_t scalars(const ParameterStore& s, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& p : s.all()) {
        if (p.name.rfind(prefix, 0) == 0) n += p.value.size();
    }
    return n;
}

}  // namespace

TEST_CASE("parse_variant") {
    CHECK(parse_variant("full") == Variant::kFull);
    CHECK(parse_variant("wo_dd") == Variant::kWithoutDD);
    CHECK(parse_variant("wo_sd") == Variant::kWithoutSD);
    CHECK(parse_variant("wo_rd") == Variant::kWithoutRD);
    CHECK_THROWS_AS(parse_variant("bogus"), std::invalid_argument);
    for (auto v : {Variant::kFull, Variant::kWithoutDD, Variant::kWithoutSD, Variant::kWithoutRD}) {
        CHECK(parse_variant(variant_name(v)) == v);
    }
}

TEST_CASE("cross_fuse examples") {
    const std::size_t d = 3;
    std::mt19937_64 rng(1);
    ParameterStore st;
    FusionIds f;
    f.inner1_w = st.add_glorot("i1w", 2 * d, d, rng);
    f.inner1_b = st.add("i1b", Matrix(1, d));
    f.inner2_w = st.add_glorot("i2w", 2 * d, d, rng);
    f.inner2_b = st.add("i2b", Matrix(1, d));
    f.outer_w = st.add_glorot("ow", 2 * d, d, rng);
    f.outer_b = st.add("ob", Matrix::from_rows({{0.25, -1, 2}}));
    Tape t;
    ForwardContext ctx(t, st);
    const auto z = t.constant(Matrix(1, d));
    // all-zero inputs with zero inner biases leave only the outer bias
    CHECK(cross_fuse(ctx, f, z, z, z, z).value() == st[f.outer_b].value);

    // swapping both pairings together with the two inner maps is a no-op up to
    // the outer block order
    const auto a = t.constant(Matrix::from_rows({{1, 2, 3}})), b = t.constant(Matrix::from_rows({{-1, 0, 4}}));
    const auto c = t.constant(Matrix::from_rows({{0.5, 0.5, -2}})), e = t.constant(Matrix::from_rows({{3, -3, 1}}));
    const Matrix base = cross_fuse(ctx, f, a, b, c, e).value();
    ParameterStore sw = st;
    std::swap(sw[f.inner1_w].value, sw[f.inner2_w].value);
    Matrix ow = st[f.outer_w].value;
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t k = 0; k < d; ++k) std::swap(ow(r, k), ow(r + d, k));
    }
    sw[f.outer_w].value = ow;
    ForwardContext ctx2(t, sw);
    // inner1 sees (trend_rel, disc_ind), inner2 sees (trend_ind, disc_rel)
    const Matrix swapped = cross_fuse(ctx2, f, b, a, e, c).value();
    for (std::size_t k = 0; k < d; ++k) CHECK(swapped(0, k) == doctest::Approx(base(0, k)).epsilon(1e-12));
}

TEST_CASE("score_items examples") {
    Tape t;
    const auto table = t.constant(Matrix::identity(4));
    const auto u = t.constant(Matrix::from_rows({{0.1, 0.7, -0.2, 0.3}}));
    const Matrix s = score_items(u, table).value();
    CHECK(s == Matrix::from_rows({{0.1, 0.7, -0.2, 0.3}}));
    CHECK(score_items(t.constant(Matrix(1, 4)), table).value() == Matrix(1, 4));
}

TEST_CASE("total_loss arithmetic") {
    Tape t;
    const auto logits = t.constant(Matrix::from_rows({{1.0, 2.0, 0.5}}));
    const double ce = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5)) - 2.0;
    repdis::AdversarialLosses term{t.constant(Matrix::from_rows({{0.7}})), t.constant(Matrix::from_rows({{1.3}}))};
    const std::vector<repdis::AdversarialLosses> one = {term};
    const auto full = total_loss(logits, 1, one, one, 0.4, 0.25);
    CHECK(full.terms.ce == doctest::Approx(ce).epsilon(1e-14));
    CHECK(full.terms.trend_related == 0.7);
    CHECK(full.terms.discrete_independent == 1.3);
    CHECK(full.terms.reported == doctest::Approx(ce + 0.4 * 1.4 - 0.25 * 2.6).epsilon(1e-14));
    CHECK(full.objective.scalar() == doctest::Approx(ce + 0.4 * 1.4 + 0.25 * 2.6).epsilon(1e-14));

    const auto off = total_loss(logits, 1, one, one, 0.0, 0.0);
    CHECK(off.objective.scalar() == doctest::Approx(ce).epsilon(1e-14));
    const auto none = total_loss(logits, 1, {}, {}, 0.4, 0.25);
    CHECK(none.terms.reported == doctest::Approx(ce).epsilon(1e-14));
}

TEST_CASE("adam single step matches the formula") {
    ParameterStore st;
    const auto id = st.add("w", Matrix::from_rows({{1.0, -2.0}}));
    GradientSet g(st);
    g[id] = Matrix::from_rows({{0.5, -3.0}});
    AdamState state(st);
    AdamOptions o;
    o.learning_rate = 0.01;
    adam_step(st, g, state, o);
    // first step: m_hat = g, v_hat = g^2
    for (std::size_t k = 0; k < 2; ++k) {
        const double gk = g[id][k];
        const double expected = (k == 0 ? 1.0 : -2.0) - 0.01 * gk / (std::abs(gk) + 1e-8);
        CHECK(st[id].value[k] == doctest::Approx(expected).epsilon(1e-14));
    }
    CHECK(state.step == 1);

    // second step against an explicit recurrence
    const Matrix before = st[id].value;
    adam_step(st, g, state, o);
    for (std::size_t k = 0; k < 2; ++k) {
        const double gk = g[id][k];
        const double m = 0.1 * gk + 0.9 * 0.1 * gk;
        const double v = 0.001 * gk * gk + 0.999 * 0.001 * gk * gk;
        const double step = 0.01 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
        CHECK(st[id].value[k] == doctest::Approx(before[k] - step).epsilon(1e-13));
    }
}

TEST_CASE("adam: zero gradient, non-finite abort") {
    ParameterStore st;
    st.add("a", Matrix::from_rows({{1.0}}));
    const auto b = st.add("layer.b", Matrix::from_rows({{2.0, 3.0}}));
    GradientSet g(st);
    AdamState state(st);
    adam_step(st, g, state, {});
    CHECK(st[0].value(0, 0) == 1.0);
    CHECK(st[b].value == Matrix::from_rows({{2.0, 3.0}}));

    g[b](0, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
        adam_step(st, g, state, {});
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("layer.b") != std::string::npos);
    }
    CHECK(st[b].value == Matrix::from_rows({{2.0, 3.0}}));
    CHECK(state.step == 1);
}

TEST_CASE("parameter inventory per variant") {
    const std::size_t d = 8, items = 12, cats = 4;
    const auto full = init_model(small_config(Variant::kFull), items, cats, 1);
    const auto wo_sd = init_model(small_config(Variant::kWithoutSD), items, cats, 1);
    const auto wo_dd = init_model(small_config(Variant::kWithoutDD), items, cats, 1);
    const auto wo_rd = init_model(small_config(Variant::kWithoutRD), items, cats, 1);

    const std::size_t branch = 2 * (d * d + d) + d * d + d + d * cats + cats;
    const std::size_t mlp = 2 * (d * d + d) + d;
    CHECK(scalars(full.store, "trend.") == branch + d);  // plus the empty-trend fallback
    CHECK(scalars(full.store, "discrete.") == branch + mlp);
    CHECK(scalars(full.store, "fusion.") == 3 * (2 * d * d + d));
    CHECK(full.store.scalar_count() - wo_sd.store.scalar_count() == d * d + mlp + branch);
    CHECK(full.store.scalar_count() - wo_dd.store.scalar_count() == d * d + mlp + 2 * branch + 3 * (2 * d * d + d));
    CHECK(full.store.scalar_count() - wo_rd.store.scalar_count() ==
          2 * branch + 3 * (2 * d * d + d) - (2 * d * d + d));
    CHECK(!wo_dd.uses_adversarial());
    CHECK(!wo_dd.uses_masking());
    CHECK(wo_rd.uses_masking());
    CHECK(!wo_rd.uses_adversarial());
    CHECK(wo_sd.uses_adversarial());
    CHECK(!wo_sd.uses_masking());
}

TEST_CASE("forward shapes and loss per variant") {
    const auto ds = toy_dataset(3, 16, 8, 3);
    for (auto v : {Variant::kFull, Variant::kWithoutDD, Variant::kWithoutSD, Variant::kWithoutRD}) {
        const auto m = init_model(small_config(v), 16, 2, 4);
        Tape t;
        ForwardContext ctx(t, m.store);
        const auto out = forward(ctx, m, ds.users[0].train, ds.catalog, ds.users[0].validation);
        CHECK(out.logits.rows() == 1);
        CHECK(out.logits.cols() == 16);
        REQUIRE(out.loss.has_value());
        CHECK(std::isfinite(out.loss->terms.reported));
        CHECK(out.loss->terms.ce > 0.0);
        const bool adv = v == Variant::kFull || v == Variant::kWithoutSD;
        CHECK((out.loss->terms.trend_related != 0.0) == adv);
        CHECK((out.loss->terms.discrete_related != 0.0) == (v == Variant::kFull));
        const auto plain = forward(ctx, m, ds.users[0].train, ds.catalog, std::nullopt);
        CHECK(!plain.loss.has_value());
        CHECK(plain.logits.value() == out.logits.value());
    }
}

TEST_CASE("history columns per variant") {
    auto has = [](Variant v, const std::string& col) {
        const auto cols = history_columns(v);
        return std::find(cols.begin(), cols.end(), col) != cols.end();
    };
    CHECK(has(Variant::kFull, "trend_independent"));
    CHECK(has(Variant::kFull, "discrete_related"));
    CHECK(has(Variant::kFull, "degenerate_cosines"));
    CHECK(has(Variant::kWithoutSD, "trend_related"));
    CHECK(!has(Variant::kWithoutSD, "discrete_related"));
    CHECK(!has(Variant::kWithoutRD, "trend_related"));
    CHECK(has(Variant::kWithoutRD, "degenerate_cosines"));
    CHECK(!has(Variant::kWithoutDD, "degenerate_cosines"));
    for (auto v : {Variant::kFull, Variant::kWithoutDD, Variant::kWithoutSD, Variant::kWithoutRD}) {
        CHECK(has(v, "val_ndcg@10"));
        EpochRecord rec;
        rec.validation.assign(eval::metric_columns(eval::kDefaultKs).size(), 0.0);
        CHECK(history_columns(v).size() == history_row(rec, v).size());
    }
}

TEST_CASE("epoch batches cover every prefix once") {
    const auto ds = toy_dataset(7, 16, 8, 5);
    TrainConfig cfg;
    cfg.model = small_config(Variant::kFull);
    cfg.batch_size = 3;
    const auto batches = epoch_batches(ds, cfg, 1);
    CHECK(batches.size() == 3);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& b : batches) {
        for (const auto& e : b) {
            CHECK(e.position >= 1);
            CHECK(e.position < ds.users[e.user].train.size());
            seen.insert({e.user, e.position});
        }
    }
    CHECK(seen.size() == 7 * 7);
    CHECK(epoch_batches(ds, cfg, 1).size() == batches.size());

    cfg.max_targets_per_user = 2;
    std::size_t total = 0;
    for (const auto& b : epoch_batches(ds, cfg, 2)) total += b.size();
    CHECK(total == 14);
}

TEST_CASE("training is deterministic for a seed") {
    const auto ds = toy_dataset(10, 16, 8, 6);
    TrainConfig cfg;
    cfg.model = small_config(Variant::kFull);
    cfg.model.transformer.dropout = 0.2;
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.adam.learning_rate = 1e-2;
    const auto a = train_model(ds, cfg);
    const auto b = train_model(ds, cfg);
    REQUIRE(a.history.size() == 2);
    for (std::size_t e = 0; e < 2; ++e) {
        CHECK(history_row(a.history[e], Variant::kFull) == history_row(b.history[e], Variant::kFull));
    }
    for (std::size_t i = 0; i < a.model.store.size(); ++i) CHECK(a.model.store[i].value == b.model.store[i].value);

    cfg.workers = 3;
    const auto c = train_model(ds, cfg);
    for (std::size_t i = 0; i < a.model.store.size(); ++i) CHECK(a.model.store[i].value == c.model.store[i].value);

    cfg.workers = 1;
    cfg.seed = 2;
    const auto d = train_model(ds, cfg);
    CHECK(d.history[0].loss.reported != a.history[0].loss.reported);
}

TEST_CASE("overfits a tiny dataset") {
    const auto ds = toy::memorization_set(5, 10, 8, 7);
    TrainConfig cfg;
    cfg.model = small_config(Variant::kFull, 16);
    cfg.batch_size = 5;
    cfg.epochs = 200;
    cfg.patience = 1000;
    cfg.adam.learning_rate = 1e-2;
    cfg.keep_best = false;
    auto result = train_model(ds, cfg);
    const double rate = training_hit_rate(result.model, ds, 1);
    MESSAGE("training Recall@1 " << rate << " final ce " << result.history.back().loss.ce);
    CHECK(rate == 1.0);
    CHECK(result.history.back().loss.ce < result.history.front().loss.ce);
}

TEST_CASE("checkpoint round trip and corruption") {
    const fs::path dir = fs::temp_directory_path() / "ddsrec_ckpt_test";
    fs::create_directories(dir);
    const auto path = dir / "ckpt.txt";
    auto cfg = small_config(Variant::kWithoutSD);
    cfg.lambda1 = 0.3;
    const auto m = init_model(cfg, 12, 4, 9);
    CheckpointInfo info;
    info.epoch = 7;
    info.validation["ndcg@10"] = 0.125;
    save_checkpoint(m, info, path);
    const auto loaded = load_checkpoint(path);
    CHECK(loaded.info.epoch == 7);
    CHECK(loaded.info.validation.at("ndcg@10") == 0.125);
    CHECK(loaded.model.config.variant == Variant::kWithoutSD);
    CHECK(loaded.model.config.lambda1 == 0.3);
    CHECK(config_hash(loaded.model.config) == config_hash(cfg));
    REQUIRE(loaded.model.store.size() == m.store.size());
    for (std::size_t i = 0; i < m.store.size(); ++i) CHECK(loaded.model.store[i].value == m.store[i].value);

    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    auto rewrite = [&](const std::string& from, const std::string& to) {
        std::string s = text;
        const auto pos = s.find(from);
        REQUIRE(pos != std::string::npos);
        s.replace(pos, from.size(), to);
        std::ofstream(path) << s;
    };
    rewrite("param item_embedding 12 8", "param item_embedding 11 8");
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
    rewrite("config model.d 8", "config model.d 16");
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.txt"), DataError);
    fs::remove_all(dir);
}

TEST_CASE("micro model gradient check, all variants") {
    for (auto v : {Variant::kFull, Variant::kWithoutDD, Variant::kWithoutSD, Variant::kWithoutRD}) {
        const auto r = micro_model_check(v, 3);
        CHECK_MESSAGE(r.passed(), variant_name(v) << ": " << r.summary());
    }
}

TEST_CASE("ablation isolation: lambdas are inert without discriminators") {
    const auto ds = toy_dataset(6, 16, 8, 12);
    for (auto v : {Variant::kWithoutRD, Variant::kWithoutDD}) {
        TrainConfig cfg;
        cfg.model = small_config(v);
        cfg.batch_size = 3;
        cfg.epochs = 2;
        const auto a = train_model(ds, cfg);
        cfg.model.lambda1 = 0.0;
        cfg.model.lambda2 = 0.0;
        const auto b = train_model(ds, cfg);
        for (std::size_t e = 0; e < 2; ++e) {
            CHECK(history_row(a.history[e], v) == history_row(b.history[e], v));
            CHECK(a.history[e].loss.reported == a.history[e].loss.ce);
        }
    }
}
