#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecodrive/dp.hpp"
#include "ecodrive/mpc.hpp"
#include "ecodrive/net.hpp"

namespace ecodrive {

inline constexpr const char* kCodeVersion = "1.0.0";

// Synthetic training-route generator knobs. Lengths land on 500 m marks,
// light counts scale with length, and every other variant carries a jam.
struct CorpusSpec {
    int variants = 8;
    double min_length_m = 1000.0;
    double max_length_m = 5000.0;
    int max_lights = 4;
    double lead_shift_s = 4.0;  // lead departs this long before the ego
};

// Everything a pipeline run needs, loadable from JSON. Defaults are the
// benchmark configuration; any subset of keys may be overridden.
struct PipelineConfig {
    std::uint64_t seed = 1;
    double gamma = 0.65;
    std::string out_dir = "out";
    std::string vehicle_file;                 // empty: built-in parameters
    std::vector<std::string> scenario_files;  // empty: the generated corpus
    std::vector<std::string> bench_scenarios = {"route1", "route2"};
    CorpusSpec corpus;
    GridSpec train_grid;   // corpus value functions
    GridSpec bench_grid;   // full-route benchmark solves
    NetConfig net;
    std::size_t ag_budget = 60000;  // dataset row budgets after thinning
    std::size_t aw_budget = 60000;
    MpcConfig mpc;
    int jobs = 1;

    void validate() const;
    VehicleParams vehicle() const;
    std::string scenario_dir() const { return out_dir + "/scenarios"; }
    std::string vf_dir() const { return out_dir + "/vf"; }
    std::string net_dir() const { return out_dir + "/nets"; }
    std::string bench_dir() const { return out_dir + "/bench"; }
};

PipelineConfig default_pipeline_config();
PipelineConfig load_pipeline_config(const std::string& path);
// Canonical JSON. out_dir and file paths are left out so the hash names the
// run's content, not where its artifacts land.
std::string pipeline_config_json(const PipelineConfig& cfg);
std::uint64_t pipeline_config_hash(const PipelineConfig& cfg);

struct CorpusEntry {
    std::string file;  // scenario path on disk
    Scenario scenario;
};

// Writes the seeded corpus (scenario files plus lead CSVs) under
// scenario_dir(). Leads come from a full solve of each route, shifted
// earlier by lead_shift_s so the ego starts on the lead's tail.
std::vector<CorpusEntry> cmd_gen_scenarios(const PipelineConfig& cfg);

// The training corpus: explicit scenario_files when given, otherwise the
// generated files (which must already exist). Missing file: ConfigError
// naming the path.
std::vector<CorpusEntry> corpus_scenarios(const PipelineConfig& cfg);

struct SolveEntry {
    std::string scenario;
    std::string variant;  // nojam | jam
    std::string vf_file;  // basename under vf_dir(); empty on failure
    std::string status;   // "ok" or the error text
    double cost = 0.0;
    double efc_g = 0.0;
    double time_s = 0.0;
    double final_soc = 0.0;
    std::uint64_t file_hash = 0;
};

struct SolveDpOutcome {
    std::vector<SolveEntry> entries;
    std::string summary_csv;
    int failures = 0;

    bool all_failed() const {
        return !entries.empty() && failures == static_cast<int>(entries.size());
    }
};

// Two value functions per corpus scenario: "nojam" strips jams and the lead
// (the agnostic labels), "jam" keeps the scenario as recorded.
SolveDpOutcome cmd_solve_dp(const PipelineConfig& cfg);

struct TrainOutcome {
    bool aw = false;
    std::string net_file;
    std::string epochs_csv;
    std::string report_json;
    TrainReport report;
    std::size_t dataset_rows = 0;
};

// ag trains on the nojam value functions, aw on the jam ones (which carry
// the lead gaps its extra inputs need).
TrainOutcome cmd_train(const PipelineConfig& cfg, bool aw);

struct ControllerRun {
    std::string controller;  // dp | ag_nn_mpc | ensemble_mpc
    bool ok = false;
    std::string note;  // abort reason or audit annotation; empty when clean
    double efc_g = 0.0;
    double time_s = 0.0;
    double final_soc = 0.0;
    double cost = 0.0;
    std::string traj_csv;    // basenames under bench_dir()
    std::string series_csv;
    std::string diag_jsonl;  // MPC controllers only
};

struct RouteBenchmark {
    std::string route;
    std::uint64_t scenario_hash = 0;
    ControllerRun dp;
    ControllerRun ag;
    ControllerRun ensemble;
    double efc_delta_pct = 0.0;   // ensemble vs ag, signed
    double time_delta_pct = 0.0;
    bool ordering_ok = false;     // EFC: dp <= ensemble <= ag
};

struct BenchmarkReport {
    std::vector<RouteBenchmark> routes;
    bool all_ok = false;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::uint64_t ag_net_hash = 0;
    std::uint64_t aw_net_hash = 0;
    std::string code_version = kCodeVersion;
    std::string text;         // rendered table, same bytes as report.txt
    std::string report_txt;   // written paths
    std::string report_json;
};

// Runs the three controllers on every bench scenario and writes the report
// pair plus per-controller trajectory, series, and diagnostics files.
BenchmarkReport cmd_benchmark(const PipelineConfig& cfg);

std::string benchmark_report_text(const BenchmarkReport& rep);
std::string benchmark_report_json_text(const BenchmarkReport& rep);

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::uint64_t seed = 0;  // reproduction seed for the failing workload
    std::string detail;
};

struct VerifyOutcome {
    std::vector<PropertyResult> results;
    bool all_passed = false;
};

std::vector<std::string> verify_property_names();

// Self-contained property checks on small seeded workloads; list_only
// enumerates without running.
VerifyOutcome cmd_verify(const PipelineConfig& cfg, bool list_only);

// Distance-indexed plot series, one row per route node (steps + 1 rows):
// x, speed, SoC, cumulative equivalent fuel, lead gap at the node's clock
// (blank where no lead sample covers it).
void save_series_csv(const Trajectory& traj, const Scenario& sc, const VehicleParams& p,
                     const std::string& path);

// A three-step instance small enough for exhaustive control search, with a
// seeded mix of light, jam, and lead. Shared by the verify command and the
// acceptance checks.
struct TinyInstance {
    Scenario sc;
    GridSpec spec;
};
TinyInstance make_tiny_instance(std::uint64_t seed);

}  // namespace ecodrive
