#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "ptlab/config.hpp"
#include "ptlab/errors.hpp"
#include "ptlab/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Data-poisoning backdoor laboratory: attack, isolate, unlearn"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    std::string role = "cleansed";
    uint64_t seed_value = 0;
    bool resume = false;

    app.add_option("--config", config_path, "experiment config (JSON)");
    app.add_option("--out", out_dir, "override the config's output directory");
    auto* seed_opt = app.add_option("--seed", seed_value, "override the config's global seed");

    auto* run_cmd = app.add_subcommand("run", "execute the full seven-stage pipeline");
    run_cmd->add_flag("--resume", resume, "skip stages whose artifacts are intact");
    app.add_subcommand("poison", "build the poisoned train set and both test sets");
    app.add_subcommand("train-baseline", "train the baseline model on the poisoned set");
    app.add_subcommand("probe", "train the prefix-frozen probe model");
    app.add_subcommand("isolate", "split the train set by probe losses");
    app.add_subcommand("defend", "unlearn-finetune the baseline into the cleansed model");
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on both test sets");
    eval_cmd->add_option("--role", role, "baseline or cleansed (default cleansed)")
        ->check(CLI::IsMember({"baseline", "cleansed"}));
    app.add_subcommand("report", "print the report table of a finished run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (config_path.empty()) {
            throw ptlab::ConfigError("missing --config <path>");
        }
        ptlab::ExperimentConfig cfg = ptlab::load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (seed_opt->count() > 0) {
            cfg.seed = seed_value;
            cfg.derive_phase_seeds();
        }

        const std::string command = app.get_subcommands().front()->get_name();
        if (command == "run") {
            ptlab::run_pipeline(cfg, resume);
            std::fputs(ptlab::report_text(cfg).c_str(), stdout);
        } else if (command == "evaluate") {
            ptlab::run_stage(cfg, role == "baseline" ? "evaluate-baseline" : "evaluate-defended");
            std::fprintf(stderr, "stage evaluate-%s complete\n",
                         role == "baseline" ? "baseline" : "defended");
        } else if (command == "report") {
            std::fputs(ptlab::report_text(cfg).c_str(), stdout);
        } else {
            ptlab::run_stage(cfg, command);
            std::fprintf(stderr, "stage %s complete\n", command.c_str());
        }
        return 0;
    } catch (const ptlab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ptlab::DivergenceError& e) {
        std::fprintf(stderr, "divergence at epoch %d, step %d: %s\n", e.epoch, e.step, e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
