// Pipeline driver: generate the training corpus, solve its value functions,
// fit the terminal-cost nets, benchmark the controllers, or run the property
// suite. Exit codes: 0 success, 1 property or benchmark failure, 2 config
// error.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ecodrive/pipeline.hpp"

using namespace ecodrive;

namespace {

int run_gen(const PipelineConfig& cfg) {
    const std::vector<CorpusEntry> entries = cmd_gen_scenarios(cfg);
    for (const CorpusEntry& e : entries) {
        const Route& r = e.scenario.route;
        std::cout << e.file << "  (" << r.length_m << " m, " << r.lights.size() << " light(s), "
                  << (r.jams.empty() ? "free" : "jammed") << ")\n";
    }
    std::cout << entries.size() << " scenario(s) written\n";
    return 0;
}

int run_solve(const PipelineConfig& cfg) {
    const SolveDpOutcome out = cmd_solve_dp(cfg);
    for (const SolveEntry& e : out.entries) {
        std::cout << e.scenario << " [" << e.variant << "] " << e.status;
        if (e.status == "ok") std::cout << "  cost " << fmt_g(e.cost, 6) << " -> " << e.vf_file;
        std::cout << "\n";
    }
    std::cout << "summary: " << out.summary_csv << "\n";
    if (out.failures > 0) {
        std::cout << out.failures << " of " << out.entries.size() << " solves failed\n";
    }
    return out.all_failed() ? 1 : 0;
}

int run_train(const PipelineConfig& cfg, const std::string& variant) {
    const TrainOutcome out = cmd_train(cfg, variant == "aw");
    std::cout << variant << ": " << out.dataset_rows << " rows (" << out.report.train_rows
              << " train / " << out.report.val_rows << " held out), relative RMSE "
              << fmt_g(out.report.holdout_rel_rmse, 4) << "\n";
    std::cout << "net: " << out.net_file << "\n";
    std::cout << "epoch losses: " << out.epochs_csv << "\n";
    std::cout << "report: " << out.report_json << "\n";
    return 0;
}

int run_benchmark(const PipelineConfig& cfg) {
    const BenchmarkReport rep = cmd_benchmark(cfg);
    std::cout << rep.text;
    std::cout << "report: " << rep.report_txt << "\n";
    std::cout << "machine-readable: " << rep.report_json << "\n";
    return rep.all_ok ? 0 : 1;
}

int run_verify(const PipelineConfig& cfg, bool list_only) {
    const VerifyOutcome out = cmd_verify(cfg, list_only);
    if (list_only) {
        for (const PropertyResult& pr : out.results) std::cout << pr.name << "\n";
        return 0;
    }
    for (const PropertyResult& pr : out.results) {
        std::cout << (pr.passed ? "[PASS] " : "[FAIL] ") << pr.name << " (seed " << pr.seed
                  << "): " << pr.detail << "\n";
    }
    std::cout << (out.all_passed ? "all properties passed\n" : "property failures present\n");
    return out.all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"eco-driving optimization laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir, variant;
    std::uint64_t seed = 0;
    int jobs = 0;
    bool list_only = false;

    app.add_option("--config", config_path, "pipeline configuration JSON");
    CLI::Option* seed_opt = app.add_option("--seed", seed, "override the configured seed");
    CLI::Option* out_opt = app.add_option("--out", out_dir, "override the output directory");
    CLI::Option* jobs_opt = app.add_option("--jobs", jobs, "override the worker count");

    CLI::App* gen = app.add_subcommand("gen-scenarios", "write the synthetic training corpus");
    CLI::App* solve = app.add_subcommand("solve-dp", "solve value functions for the corpus");
    CLI::App* train = app.add_subcommand("train", "fit a terminal-cost net");
    train->add_option("--variant", variant, "net variant")
        ->required()
        ->check(CLI::IsMember({"ag", "aw"}));
    CLI::App* bench = app.add_subcommand("benchmark", "run the controllers on the bench routes");
    CLI::App* verify = app.add_subcommand("verify", "run the property suite");
    verify->add_flag("--list", list_only, "list properties without running them");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        PipelineConfig cfg =
            config_path.empty() ? default_pipeline_config() : load_pipeline_config(config_path);
        if (*seed_opt) cfg.seed = seed;
        if (*out_opt) cfg.out_dir = out_dir;
        if (*jobs_opt) cfg.jobs = jobs;
        cfg.validate();

        if (*gen) return run_gen(cfg);
        if (*solve) return run_solve(cfg);
        if (*train) return run_train(cfg, variant);
        if (*bench) return run_benchmark(cfg);
        if (*verify) return run_verify(cfg, list_only);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
