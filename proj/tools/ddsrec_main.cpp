// ddsrec command line. Config precedence, lowest to highest: built-in
// defaults, --config file, --set key=value (in order), dedicated flags.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ddsrec/cli/commands.hpp"
#include "ddsrec/errors.hpp"

namespace cli = ddsrec::cli;

int main(int argc, char** argv) {
    CLI::App app{"ddsrec: dual-disentanglement sequential recommender"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand help for every subcommand");

    std::string config_path;
    std::vector<std::string> assignments;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    std::optional<std::string> out;
    std::optional<std::string> split;
    std::vector<std::string> inputs;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Key/value config file")->check(CLI::ExistingFile);
        sub->add_option("--set", assignments, "Override one key (key=value), repeatable");
        sub->add_option("--seed", seed, "Root seed");
        sub->add_option("--out", out, "Output directory");
    };

    auto* pre = app.add_subcommand("preprocess", "Raw log -> k-core -> leave-one-out dataset directory");
    add_common(pre);
    std::optional<std::string> input;
    pre->add_option("input", input, "Interaction log (overrides data.input)");
    auto* synth = app.add_subcommand("synth", "Generate a planted multi-interest dataset");
    add_common(synth);
    auto* train = app.add_subcommand("train", "Train a model; writes checkpoint and history");
    add_common(train);
    train->add_option("--variant", variant, "full, wo_dd, wo_sd or wo_rd");
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (or 'popularity')");
    add_common(eval);
    eval->add_option("--split", split, "val or test");
    std::optional<std::string> checkpoint;
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file (overrides eval.checkpoint)");
    auto* ablate = app.add_subcommand("ablate", "Train and evaluate all four variants");
    add_common(ablate);
    ablate->add_option("--split", split, "val or test");
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient battery");
    add_common(grad);
    auto* plots = app.add_subcommand("export-plots", "Reshape histories/reports into long CSV");
    add_common(plots);
    plots->add_option("inputs", inputs, "history.csv, ablation.csv or metrics_*.json files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kExitOk : cli::kExitUsage;
    }

    try {
        cli::RunConfig cfg;
        if (!config_path.empty()) cli::apply_config_file(cfg, config_path);
        for (const auto& a : assignments) cli::apply_assignment(cfg, a);
        if (seed) cfg.seed = *seed;
        if (variant) cfg.set("model.variant", *variant);
        if (out) cfg.out = *out;
        if (split) cfg.set("eval.split", *split);
        if (input) cfg.input = *input;
        if (checkpoint) cfg.checkpoint = *checkpoint;
        cfg.finalize();

        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "preprocess") return cli::cmd_preprocess(cfg, std::cout);
        if (name == "synth") return cli::cmd_synth(cfg, std::cout);
        if (name == "train") return cli::cmd_train(cfg, std::cout);
        if (name == "eval") return cli::cmd_eval(cfg, std::cout);
        if (name == "ablate") return cli::cmd_ablate(cfg, std::cout);
        if (name == "gradcheck") return cli::cmd_gradcheck(cfg, std::cout);
        std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
        return cli::cmd_export_plots(cfg, paths, std::cout);
    } catch (const cli::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return cli::kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return cli::kExitUsage;
    } catch (const ddsrec::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return cli::kExitNumerical;
    } catch (const ddsrec::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return cli::kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kExitData;
    }
}
