// Acceptance suite. Prints one PASS/FAIL/WARN/SKIP line per criterion and
// exits nonzero if any criterion fails. Arguments filter criteria by name.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "common/metric_oracle.hpp"
#include "common/toy_data.hpp"
#include "ddsrec/data/preprocess.hpp"
#include "ddsrec/errors.hpp"
#include "ddsrec/data/synth.hpp"
#include "ddsrec/eval/evaluate.hpp"
#include "ddsrec/eval/metrics.hpp"
#include "ddsrec/numerics/tape.hpp"
#include "ddsrec/parallel.hpp"
#include "ddsrec/repdis/probe.hpp"
#include "ddsrec/seqdis/masking.hpp"
#include "ddsrec/train/grad_battery.hpp"
#include "ddsrec/train/trainer.hpp"

using namespace ddsrec;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

enum class Status { kPass, kFail, kWarn, kSkip };

struct Outcome {
    Status status = Status::kPass;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

Matrix randn(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Matrix m(r, c);
    for (double& v : m.flat()) v = n(rng);
    return m;
}

data::SplitDataset synthetic(const data::SynthSpec& spec) {
    auto s = data::synthesize_dataset(spec);
    auto records = data::five_core_filter(std::move(s.records), 5);
    auto catalog = data::Catalog::from_records(records);
    const auto seqs = data::build_sequences(records, catalog);
    return data::leave_one_out_split(seqs, std::move(catalog), 50);
}

// ---------------------------------------------------------------------------

Outcome gradient_battery() {
    const auto report = train::run_grad_battery(1, 100);
    std::size_t failed = 0;
    std::string first;
    double worst = 0.0;
    for (const auto& e : report.entries) {
        worst = std::max(worst, e.report.max_error);
        if (!e.report.passed()) {
            if (first.empty()) first = e.name;
            ++failed;
        }
    }
    Outcome o;
    o.detail = std::to_string(report.entries.size()) + " entries, worst error " + fixed(worst * 1e6, 3) +
               "e-6, " + fixed(report.seconds, 1) + " s (limit 60 s)";
    if (failed > 0) {
        o.status = Status::kFail;
        o.detail += ", " + std::to_string(failed) + " failing, first " + first;
    } else if (report.seconds > 60.0) {
        o.status = Status::kFail;
    }
    return o;
}

Outcome masking_oracle() {
    std::mt19937_64 rng(101);
    const double thetas[] = {-0.5, 0.0, 0.5, 0.9};
    std::size_t mismatches = 0, invariant_breaks = 0, monotone_breaks = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t items = 1 + rng() % 30, d = 1 + rng() % 8, len = 1 + rng() % 20;
        const Matrix table = randn(items, d, rng);
        std::vector<std::size_t> seq(len);
        for (auto& s : seq) s = rng() % items;
        const Matrix proxy = randn(1, d, rng);
        std::vector<bool> prev;
        for (double th : thetas) {
            const auto bits = seqdis::adaptive_mask(table, seq, proxy.row(0), th).bits;
            for (std::size_t j = 0; j < len; ++j) {
                double dot = 0, na = 0, nb = 0;
                for (std::size_t c = 0; c < d; ++c) {
                    dot += table(seq[j], c) * proxy(0, c);
                    na += table(seq[j], c) * table(seq[j], c);
                    nb += proxy(0, c) * proxy(0, c);
                }
                mismatches += bits[j] != (dot / (std::sqrt(na) * std::sqrt(nb)) >= th);
                if (!prev.empty() && bits[j] && !prev[j]) ++monotone_breaks;
            }
            prev = bits;

            // partition: disjoint, covering, order preserving
            const auto sp = seqdis::split_sequence(seq, bits);
            std::vector<int> hit(len, 0);
            for (auto p : sp.trend_positions) hit[p] += bits[p] ? 1 : 100;
            for (auto p : sp.discrete_positions) hit[p] += bits[p] ? 100 : 1;
            const bool sorted = std::is_sorted(sp.trend_positions.begin(), sp.trend_positions.end()) &&
                                std::is_sorted(sp.discrete_positions.begin(), sp.discrete_positions.end());
            if (!sorted || std::any_of(hit.begin(), hit.end(), [](int h) { return h != 1; })) ++invariant_breaks;
        }
    }
    Outcome o;
    o.detail = "1000 instances x 4 thresholds: " + std::to_string(mismatches) + " oracle mismatches, " +
               std::to_string(invariant_breaks) + " partition breaks, " + std::to_string(monotone_breaks) +
               " monotonicity breaks";
    if (mismatches + invariant_breaks + monotone_breaks > 0) o.status = Status::kFail;
    return o;
}

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

Outcome metric_oracles() {
    std::mt19937_64 rng(202);
    std::size_t mismatches = 0, bound_breaks = 0, monotone_breaks = 0;
    double worst = 0.0;
    auto cmp = [&](double a, double b) {
        worst = std::max(worst, std::abs(a - b));
        if (std::abs(a - b) > 1e-12) ++mismatches;
    };
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t items = 5 + rng() % 60, cats = 1 + rng() % 12;
        // alternate single- and multi-category catalogs
        const auto cat = trial % 2 ? oracle::random_catalog(items, cats, rng) : single_category_catalog(items, cats);
        std::vector<double> s(items);
        for (auto& v : s) v = static_cast<double>(rng() % 20) / 4.0;  // plenty of ties
        std::vector<bool> ex(items);
        for (std::size_t i = 0; i < items; ++i) ex[i] = rng() % 5 == 0;
        const std::size_t target = rng() % items;
        double prev_r = -1, prev_cc = -1;
        for (std::size_t k : {5, 10, 20}) {
            const auto l = eval::topk(s, k, ex);
            if (l != oracle::topk(s, k, ex)) ++mismatches;
            cmp(eval::recall_at_k(l, target), oracle::recall(l, target));
            cmp(eval::ndcg_at_k(l, target), oracle::ndcg(l, target));
            const double ce = eval::ce_at_k(l, cat);
            const double cc = eval::cc_at_k(l, cat);
            cmp(ce, oracle::ce(l, cat));
            cmp(cc, oracle::cc(l, cat));
            const bool single = trial % 2 == 0;
            // with multi-category items the support is the covered set, not K
            const double bound = single ? std::log(static_cast<double>(std::min(k, cats)))
                                        : std::log(std::max(1.0, cc * static_cast<double>(cats)));
            if (ce < 0.0 || ce > bound + 1e-12) ++bound_breaks;
            const double r = eval::recall_at_k(l, target);
            if (r < prev_r || cc < prev_cc) ++monotone_breaks;
            prev_r = r;
            prev_cc = cc;
        }
    }
    const auto hand_cat = single_category_catalog(40, 31);
    const bool hand = eval::ndcg_at_k({4, 7, 9}, 9) == 0.5 &&
                      std::abs(eval::ce_at_k({0, 1, 2, 3, 4}, hand_cat) - std::log(5.0)) <= 1e-15 &&
                      std::abs(eval::cc_at_k({0, 1, 2, 3, 31}, hand_cat) - 4.0 / 31.0) <= 1e-15;
    Outcome o;
    o.detail = "1000 instances x K in {5,10,20}: " + std::to_string(mismatches) + " mismatches (max diff " +
               fixed(worst * 1e12, 3) + "e-12), " + std::to_string(bound_breaks) + " CE bound breaks, " +
               std::to_string(monotone_breaks) + " monotonicity breaks, hand cases " + (hand ? "exact" : "WRONG");
    if (mismatches + bound_breaks + monotone_breaks > 0 || !hand) o.status = Status::kFail;
    return o;
}

// Recount everything from scratch each round until nothing changes.
std::vector<data::InteractionRecord> iterative_core(std::vector<data::InteractionRecord> recs, std::size_t k) {
    for (;;) {
        std::map<std::string, std::size_t> u, i;
        for (const auto& r : recs) {
            ++u[r.user];
            ++i[r.item];
        }
        std::vector<data::InteractionRecord> keep;
        for (const auto& r : recs) {
            if (u[r.user] >= k && i[r.item] >= k) keep.push_back(r);
        }
        if (keep.size() == recs.size()) return keep;
        recs = std::move(keep);
    }
}

Outcome five_core_oracle() {
    std::mt19937_64 rng(303);
    std::size_t mismatches = 0, not_fixpoint = 0, empty_cases = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t users = 3 + rng() % 18, items = 3 + rng() % 18;
        const double density = std::uniform_real_distribution<double>(0.25, 0.95)(rng);
        std::vector<data::InteractionRecord> recs;
        std::int64_t ts = 0;
        for (std::size_t a = 0; a < users; ++a) {
            for (std::size_t b = 0; b < items; ++b) {
                const int reps = std::bernoulli_distribution(density)(rng) ? 1 + static_cast<int>(rng() % 2) : 0;
                for (int r = 0; r < reps; ++r) {
                    recs.push_back({"u" + std::to_string(a), "i" + std::to_string(b), ts++, {"c"}});
                }
            }
        }
        std::shuffle(recs.begin(), recs.end(), rng);
        const auto expected = iterative_core(recs, 5);
        if (expected.empty()) {
            ++empty_cases;
            try {
                (void)data::five_core_filter(recs, 5);
                ++mismatches;
            } catch (const DataError&) {
            }
            continue;
        }
        const auto got = data::five_core_filter(recs, 5);
        if (got != expected) ++mismatches;
        if (data::five_core_filter(got, 5) != got) ++not_fixpoint;
    }
    Outcome o;
    o.detail = "500 trials (<= 20x20, " + std::to_string(empty_cases) + " empty): " + std::to_string(mismatches) +
               " mismatches, " + std::to_string(not_fixpoint) + " non-fixpoints";
    if (mismatches + not_fixpoint > 0) o.status = Status::kFail;
    return o;
}

Outcome learning_sanity() {
    const auto t0 = Clock::now();
    double model_sum = 0.0, pop_sum = 0.0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        data::SynthSpec spec;  // 1000 users, 200 items, 8 categories, 2 interests, noise 0.1
        spec.seed = seed;
        const auto ds = synthetic(spec);
        train::TrainConfig cfg;
        cfg.seed = seed;
        cfg.epochs = 20;
        cfg.patience = 5;
        cfg.workers = worker_count();
        const auto result = train::train_model(ds, cfg);
        const double r = eval::evaluate(result.model, ds, eval::Split::kTest, eval::kDefaultKs, cfg.workers)
                             .get("recall@10");
        const double p = eval::evaluate_popularity(ds, eval::Split::kTest).get("recall@10");
        model_sum += r;
        pop_sum += p;
        per_seed += " " + fixed(r, 3) + "/" + fixed(p, 3);
    }
    const double secs = seconds_since(t0);
    const double ratio = model_sum / std::max(pop_sum, 1e-12);
    Outcome o;
    o.detail = "test Recall@10 model/popularity per seed:" + per_seed + "; mean ratio " + fixed(ratio, 2) +
               "x (need >= 5x), " + fixed(secs, 0) + " s for 3 runs (limit 600 s each)";
    if (ratio < 5.0 || secs / 3.0 > 600.0) o.status = Status::kFail;
    return o;
}

Outcome overfit_sanity() {
    const auto ds = toy::memorization_set(5, 10, 8, 1);
    train::TrainConfig cfg;
    auto& m = cfg.model;
    m.transformer.d = 16;
    m.transformer.blocks = 1;
    m.transformer.max_len = 8;
    m.transformer.dropout = 0.0;
    m.transformer.emb_dropout = 0.0;
    m.mask.proxy_window = 3;
    cfg.batch_size = 5;
    cfg.epochs = 500;
    cfg.patience = cfg.epochs;
    cfg.adam.learning_rate = 1e-2;
    cfg.keep_best = false;
    // "reaches within 500 epochs": the first epoch whose parameters memorize
    // every training prefix counts
    std::size_t reached = 0;
    double ce_then = 0.0;
    const auto result = train::train_model(ds, cfg, [&](const train::EpochRecord& rec, const train::ModelParams& p) {
        if (reached == 0 && train::training_hit_rate(p, ds, 1) == 1.0) {
            reached = rec.epoch;
            ce_then = rec.loss.ce;
        }
    });
    const double rate = reached ? 1.0 : train::training_hit_rate(result.model, ds, 1);
    Outcome o;
    o.detail = "5 users, 10 items: ";
    o.detail += reached ? "training Recall@1 1.0 first at epoch " + std::to_string(reached) + " (training CE " +
                              fixed(ce_then, 4) + ")"
                        : "training Recall@1 " + fixed(rate, 4) + " after 500 epochs";
    o.detail += ", final-epoch rate " + fixed(train::training_hit_rate(result.model, ds, 1), 4);
    if (rate != 1.0) o.status = Status::kFail;
    return o;
}

// Trains full and wo_sd on planted-diversity data for 5 seeds; the full
// models are kept for the probe criterion.
struct AblationRuns {
    std::vector<data::SplitDataset> datasets;
    std::vector<train::ModelParams> full_models;
    double full_ce = 0, full_cc = 0, wo_ce = 0, wo_cc = 0;
    double seconds = 0;
};

AblationRuns run_ablation() {
    const auto t0 = Clock::now();
    AblationRuns runs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        data::SynthSpec spec;
        spec.users = 500;
        spec.items = 120;
        spec.categories = 8;
        spec.interests_per_user = 3;
        spec.dominant_weight = 0.5;
        spec.seed = seed;
        runs.datasets.push_back(synthetic(spec));
        const auto& ds = runs.datasets.back();
        for (auto v : {train::Variant::kFull, train::Variant::kWithoutSD}) {
            train::TrainConfig cfg;
            cfg.model.variant = v;
            cfg.model.transformer.d = 32;
            cfg.seed = seed;
            cfg.epochs = 15;
            cfg.patience = 5;
            cfg.workers = worker_count();
            auto result = train::train_model(ds, cfg);
            const auto rep = eval::evaluate(result.model, ds, eval::Split::kTest, eval::kDefaultKs, cfg.workers);
            if (v == train::Variant::kFull) {
                runs.full_ce += rep.get("ce@10") / 5.0;
                runs.full_cc += rep.get("cc@10") / 5.0;
                runs.full_models.push_back(std::move(result.model));
            } else {
                runs.wo_ce += rep.get("ce@10") / 5.0;
                runs.wo_cc += rep.get("cc@10") / 5.0;
            }
        }
    }
    runs.seconds = seconds_since(t0);
    return runs;
}

Outcome ablation_direction(const AblationRuns& r) {
    Outcome o;
    o.detail = "5 seeds: CE@10 full " + fixed(r.full_ce) + " vs wo_sd " + fixed(r.wo_ce) + ", CC@10 full " +
               fixed(r.full_cc) + " vs wo_sd " + fixed(r.wo_cc) + " (" + fixed(r.seconds, 0) + " s)";
    if (r.full_ce < r.wo_ce || r.full_cc < r.wo_cc) {
        o.status = Status::kWarn;
        o.detail += "; margin < 0, reported as a warning";
    }
    return o;
}

Outcome adversarial_probe(const AblationRuns& r) {
    double related = 0, independent = 0;
    std::string per_seed;
    for (std::size_t s = 0; s < r.full_models.size(); ++s) {
        const auto& model = r.full_models[s];
        const auto& ds = r.datasets[s];
        // features on the test inputs, label = the target's (first) category
        std::vector<std::vector<double>> fc, fi;
        std::vector<std::size_t> labels;
        for (const auto& u : ds.users) {
            const auto c = eval::make_eval_case(u, eval::Split::kTest, ds.max_len);
            Tape tape;
            ForwardContext ctx(tape, model.store);
            const auto out = train::forward(ctx, model, c.input, ds.catalog, std::nullopt);
            std::vector<double> a, b;
            for (const auto* comps : {&out.trend_components, &out.discrete_components}) {
                const auto rel = (*comps)->related.value().row(0), ind = (*comps)->independent.value().row(0);
                a.insert(a.end(), rel.begin(), rel.end());
                b.insert(b.end(), ind.begin(), ind.end());
            }
            fc.push_back(std::move(a));
            fi.push_back(std::move(b));
            labels.push_back(ds.catalog.categories_of(c.target).front());
        }
        const std::size_t train_rows = labels.size() * 7 / 10;
        const auto pc = repdis::probe_accuracy(fc, labels, ds.catalog.category_count(), train_rows);
        const auto pi = repdis::probe_accuracy(fi, labels, ds.catalog.category_count(), train_rows);
        related += std::abs(pc.excess()) / static_cast<double>(r.full_models.size());
        independent += std::abs(pi.excess()) / static_cast<double>(r.full_models.size());
        per_seed += " " + fixed(pc.accuracy, 3) + "/" + fixed(pi.accuracy, 3) + "/" + fixed(pc.chance, 3);
    }
    Outcome o;
    o.detail = "probe accuracy h^C/h^perpC/chance per seed:" + per_seed + "; mean |acc - chance| h^C " +
               fixed(related) + " vs h^perpC " + fixed(independent);
    if (!(independent < related)) o.status = Status::kFail;
    return o;
}

// ---------------------------------------------------------------------------

int run_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" DDSREC_CLI_PATH "' " + args + " >> cli.log 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const std::vector<std::string> steps = {
        "synth --out s --seed 5 --set synth.users=80 --set synth.items=40 --set synth.categories=4",
        "preprocess s/interactions.tsv --out p",
        "train --out t --seed 5 --set data.dir=p --set model.d=16 --set train.epochs=3",
        "eval --out e --set data.dir=p --checkpoint t/checkpoint.txt",
        "ablate --out a --seed 5 --set data.dir=p --set model.d=8 --set model.blocks=1 --set train.epochs=2 "
        "--set ablate.seeds=1,2",
        "export-plots --out x t/history.csv a/ablation.csv e/metrics_test.json",
        "gradcheck --out g",
    };
    const fs::path root = fs::temp_directory_path() / "ddsrec_acceptance_determinism";
    fs::remove_all(root);
    Outcome o;
    for (const char* run : {"r1", "r2"}) {
        fs::create_directories(root / run);
        for (const auto& s : steps) {
            if (run_cli(root / run, s) != 0) {
                o.status = Status::kFail;
                o.detail = "command failed: " + s;
                return o;
            }
        }
        fs::remove(root / run / "cli.log");  // gradcheck prints timings
    }
    std::size_t files = 0, differing = 0;
    std::string first;
    for (const auto& e : fs::recursive_directory_iterator(root / "r1")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), root / "r1");
        ++files;
        if (slurp(e.path()) != slurp(root / "r2" / rel)) {
            if (first.empty()) first = rel.string();
            ++differing;
        }
    }
    o.detail = std::to_string(steps.size()) + " commands run twice, " + std::to_string(files) +
               " output files compared, " + std::to_string(differing) + " differ";
    if (differing > 0 || files == 0) {
        o.status = Status::kFail;
        o.detail += ", first " + first;
    }
    fs::remove_all(root);
    return o;
}

Outcome kuairec_stats() {
    const char* path = std::getenv("DDSREC_KUAIREC");
    Outcome o;
    if (path == nullptr || !fs::exists(path)) {
        o.status = Status::kSkip;
        o.detail = "KuaiRec export not supplied (set DDSREC_KUAIREC to the interaction log; optional "
                   "DDSREC_KUAIREC_CONFIG for column mapping)";
        return o;
    }
    const fs::path dir = fs::temp_directory_path() / "ddsrec_acceptance_kuairec";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string args = "preprocess '" + fs::absolute(path).string() + "' --out d";
    if (const char* cfg = std::getenv("DDSREC_KUAIREC_CONFIG")) args += " --config '" + fs::absolute(cfg).string() + "'";
    if (run_cli(dir, args) != 0) {
        o.status = Status::kFail;
        o.detail = "preprocess failed, see " + (dir / "cli.log").string();
        return o;
    }
    const auto stats = nlohmann::json::parse(slurp(dir / "d" / "stats.json"));
    const std::size_t users = stats["users"], items = stats["items"], inter = stats["interactions"],
                      cats = stats["categories"];
    const double density = 100.0 * static_cast<double>(inter) / (static_cast<double>(users) * items);
    o.detail = std::to_string(users) + " users, " + std::to_string(items) + " items, " + std::to_string(inter) +
               " interactions, " + std::to_string(cats) + " categories, density " + fixed(density, 2) +
               "% (expected 1411, 3065, 216735, 31, 5.01%)";
    if (users != 1411 || items != 3065 || inter != 216735 || cats != 31 || std::abs(density - 5.01) > 0.01) {
        o.status = Status::kFail;
    }
    fs::remove_all(dir);
    return o;
}

}  // namespace

// Optional arguments select criteria by substring; none runs everything.
int main(int argc, char** argv) {
    const std::vector<std::string> only(argv + 1, argv + argc);
    auto selected = [&](const std::string& name) {
        return only.empty() || std::any_of(only.begin(), only.end(),
                                           [&](const std::string& f) { return name.find(f) != std::string::npos; });
    };
    int failures = 0;
    auto report = [&](const std::string& name, const std::function<Outcome()>& fn) {
        if (!selected(name)) return;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.status = Status::kFail;
            o.detail = std::string("exception: ") + e.what();
        }
        static const char* tags[] = {"PASS", "FAIL", "WARN", "SKIP"};
        std::cout << tags[static_cast<int>(o.status)] << "  " << name << ": " << o.detail << " ["
                  << fixed(seconds_since(t0), 1) << " s]" << std::endl;
        failures += o.status == Status::kFail;
    };

    report("gradient battery", gradient_battery);
    report("masking oracle", masking_oracle);
    report("metric oracles", metric_oracles);
    report("five-core oracle", five_core_oracle);
    report("learning sanity", learning_sanity);
    report("overfit sanity", overfit_sanity);
    AblationRuns ablation;
    bool ablation_ok = false;
    report("ablation direction", [&] {
        ablation = run_ablation();
        ablation_ok = true;
        return ablation_direction(ablation);
    });
    report("adversarial probe", [&] {
        if (!ablation_ok && !selected("ablation direction")) {  // filtered out; train the models here
            ablation = run_ablation();
            ablation_ok = true;
        }
        if (!ablation_ok) throw std::runtime_error("ablation runs unavailable");
        return adversarial_probe(ablation);
    });
    report("determinism", determinism);
    report("dataset statistics (conditional)", kuairec_stats);

    std::cout << (failures == 0 ? "acceptance: all criteria met" : "acceptance: " + std::to_string(failures) +
                                                                       " criterion/criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
