#include "ecodrive/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ecodrive/features.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ecodrive {

namespace {

double canonical01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

std::uint64_t mix_seed(const std::string& tag, std::uint64_t seed) {
    return fnv1a(tag, fnv1a(&seed, sizeof seed));
}

void ensure_dir(const std::string& path) { fs::create_directories(path); }

std::string basename_of(const std::string& path) { return fs::path(path).filename().string(); }

// Two decimals, fixed: report tables need stable widths, not 12 digits.
std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string signed_pct(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.2f%%", v);
    return buf;
}

json grid_to_json(const GridSpec& g) {
    json j;
    j["dv_mps"] = g.dv_mps;
    j["dsoc"] = g.dsoc;
    j["dt_s"] = g.dt_s;
    j["soc_below"] = g.soc_below;
    j["soc_above"] = g.soc_above;
    j["slow_avg_mps"] = g.slow_avg_mps;
    j["time_slack_s"] = g.time_slack_s;
    j["interp"] = g.interp == InterpMode::Nearest ? "nearest" : "multilinear";
    j["accel_grid"] = g.accel_grid;
    return j;
}

GridSpec grid_from_json(const json& j, GridSpec g) {
    g.dv_mps = j.value("dv_mps", g.dv_mps);
    g.dsoc = j.value("dsoc", g.dsoc);
    g.dt_s = j.value("dt_s", g.dt_s);
    g.soc_below = j.value("soc_below", g.soc_below);
    g.soc_above = j.value("soc_above", g.soc_above);
    g.slow_avg_mps = j.value("slow_avg_mps", g.slow_avg_mps);
    g.time_slack_s = j.value("time_slack_s", g.time_slack_s);
    if (j.contains("interp")) {
        const std::string m = j.at("interp").get<std::string>();
        if (m == "nearest") {
            g.interp = InterpMode::Nearest;
        } else if (m == "multilinear") {
            g.interp = InterpMode::Multilinear;
        } else {
            throw ConfigError("config: unknown interp mode '" + m + "'");
        }
    }
    if (j.contains("accel_grid")) g.accel_grid = j.at("accel_grid").get<std::vector<double>>();
    return g;
}

json mpc_to_json(const MpcConfig& m) {
    json j;
    j["horizon_m"] = m.horizon_m;
    j["t_gap_s"] = m.t_gap_s;
    j["proxy_projection_m"] = m.proxy_projection_m;
    j["sensing_m"] = m.sensing_m;
    j["hold_s"] = m.hold_s;
    j["max_hold_s"] = m.max_hold_s;
    j["grid"] = grid_to_json(m.grid);
    json t;
    t["w_v"] = m.terminal.w_v;
    t["w_soc"] = m.terminal.w_soc;
    t["soc_floor"] = m.terminal.soc_floor;
    j["terminal"] = t;
    return j;
}

MpcConfig mpc_from_json(const json& j, MpcConfig m) {
    m.horizon_m = j.value("horizon_m", m.horizon_m);
    m.t_gap_s = j.value("t_gap_s", m.t_gap_s);
    m.proxy_projection_m = j.value("proxy_projection_m", m.proxy_projection_m);
    m.sensing_m = j.value("sensing_m", m.sensing_m);
    m.hold_s = j.value("hold_s", m.hold_s);
    m.max_hold_s = j.value("max_hold_s", m.max_hold_s);
    if (j.contains("grid")) m.grid = grid_from_json(j.at("grid"), m.grid);
    if (j.contains("terminal")) {
        const json& t = j.at("terminal");
        m.terminal.w_v = t.value("w_v", m.terminal.w_v);
        m.terminal.w_soc = t.value("w_soc", m.terminal.w_soc);
        m.terminal.soc_floor = t.value("soc_floor", m.terminal.soc_floor);
    }
    return m;
}

json net_to_json(const NetConfig& n) {
    json j;
    j["hidden"] = n.hidden;
    j["lr"] = n.lr;
    j["momentum"] = n.momentum;
    j["batch"] = n.batch;
    j["epochs"] = n.epochs;
    j["val_split"] = n.val_split;
    return j;
}

NetConfig net_from_json(const json& j, NetConfig n) {
    if (j.contains("hidden")) n.hidden = j.at("hidden").get<std::vector<int>>();
    n.lr = j.value("lr", n.lr);
    n.momentum = j.value("momentum", n.momentum);
    n.batch = j.value("batch", n.batch);
    n.epochs = j.value("epochs", n.epochs);
    n.val_split = j.value("val_split", n.val_split);
    return n;
}

void check_grid(const GridSpec& g, const std::string& which) {
    if (g.dv_mps <= 0 || g.dsoc <= 0 || g.dt_s <= 0) {
        throw ConfigError("config: " + which + " axis steps must be positive");
    }
    if (g.soc_below < 0 || g.soc_above < 0 || g.time_slack_s < 0 || g.slow_avg_mps <= 0) {
        throw ConfigError("config: " + which + " band parameters out of range");
    }
    if (g.accel_grid.empty()) throw ConfigError("config: " + which + " needs accel levels");
}

DpConfig solver_config(const PipelineConfig& cfg) {
    DpConfig dc;
    dc.gamma = cfg.gamma;
    dc.t_gap_s = cfg.mpc.t_gap_s;
    dc.terminal = cfg.mpc.terminal;
    dc.jobs = cfg.jobs;
    return dc;
}

std::string vf_basename(const std::string& scenario, const std::string& variant) {
    return scenario + "_" + variant + ".vf";
}

}  // namespace

void PipelineConfig::validate() const {
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("config: gamma outside [0,1]");
    if (corpus.variants < 1 || corpus.variants > 64) {
        throw ConfigError("config: corpus variants outside [1,64]");
    }
    if (corpus.min_length_m < 300.0 || corpus.max_length_m < corpus.min_length_m) {
        throw ConfigError("config: corpus length range invalid");
    }
    if (corpus.max_lights < 1 || corpus.max_lights > 8) {
        throw ConfigError("config: corpus light cap outside [1,8]");
    }
    if (corpus.lead_shift_s < 0.0) throw ConfigError("config: lead shift must be >= 0");
    if (ag_budget == 0 || aw_budget == 0) throw ConfigError("config: dataset budgets must be > 0");
    if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
    if (out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
    if (bench_scenarios.empty()) throw ConfigError("config: no benchmark scenarios");
    check_grid(train_grid, "train grid");
    check_grid(bench_grid, "bench grid");
    mpc.validate();
}

VehicleParams PipelineConfig::vehicle() const {
    if (vehicle_file.empty()) {
        VehicleParams p;
        p.validate();
        return p;
    }
    return load_vehicle_params(vehicle_file);
}

PipelineConfig default_pipeline_config() {
    PipelineConfig cfg;
    cfg.bench_grid.dt_s = 0.5;
    cfg.mpc.grid.dsoc = 0.01;
    cfg.mpc.grid.slow_avg_mps = 6.0;
    cfg.mpc.grid.time_slack_s = 15.0;
    cfg.net.hidden = {48, 48};
    cfg.net.lr = 0.02;
    cfg.net.batch = 128;
    cfg.net.epochs = 60;
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    PipelineConfig cfg = default_pipeline_config();
    cfg.seed = j.value("seed", cfg.seed);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.vehicle_file = j.value("vehicle_file", cfg.vehicle_file);
    if (j.contains("scenario_files")) {
        cfg.scenario_files = j.at("scenario_files").get<std::vector<std::string>>();
    }
    if (j.contains("bench_scenarios")) {
        cfg.bench_scenarios = j.at("bench_scenarios").get<std::vector<std::string>>();
    }
    if (j.contains("corpus")) {
        const json& c = j.at("corpus");
        cfg.corpus.variants = c.value("variants", cfg.corpus.variants);
        cfg.corpus.min_length_m = c.value("min_length_m", cfg.corpus.min_length_m);
        cfg.corpus.max_length_m = c.value("max_length_m", cfg.corpus.max_length_m);
        cfg.corpus.max_lights = c.value("max_lights", cfg.corpus.max_lights);
        cfg.corpus.lead_shift_s = c.value("lead_shift_s", cfg.corpus.lead_shift_s);
    }
    if (j.contains("train_grid")) cfg.train_grid = grid_from_json(j.at("train_grid"), cfg.train_grid);
    if (j.contains("bench_grid")) cfg.bench_grid = grid_from_json(j.at("bench_grid"), cfg.bench_grid);
    if (j.contains("net")) cfg.net = net_from_json(j.at("net"), cfg.net);
    cfg.ag_budget = j.value("ag_budget", cfg.ag_budget);
    cfg.aw_budget = j.value("aw_budget", cfg.aw_budget);
    if (j.contains("mpc")) cfg.mpc = mpc_from_json(j.at("mpc"), cfg.mpc);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.validate();
    return cfg;
}

std::string pipeline_config_json(const PipelineConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["gamma"] = cfg.gamma;
    // Content identity only: where artifacts land must not change the hash,
    // so out_dir stays out and files reduce to their basenames / content.
    j["vehicle"] = hex64(fnv1a(vehicle_params_text(cfg.vehicle())));
    json files = json::array();
    for (const std::string& f : cfg.scenario_files) files.push_back(basename_of(f));
    j["scenario_files"] = files;
    json bench = json::array();
    for (const std::string& b : cfg.bench_scenarios) {
        bench.push_back(b == "route1" || b == "route2" ? b : basename_of(b));
    }
    j["bench_scenarios"] = bench;
    json c;
    c["variants"] = cfg.corpus.variants;
    c["min_length_m"] = cfg.corpus.min_length_m;
    c["max_length_m"] = cfg.corpus.max_length_m;
    c["max_lights"] = cfg.corpus.max_lights;
    c["lead_shift_s"] = cfg.corpus.lead_shift_s;
    j["corpus"] = c;
    j["train_grid"] = grid_to_json(cfg.train_grid);
    j["bench_grid"] = grid_to_json(cfg.bench_grid);
    j["net"] = net_to_json(cfg.net);
    j["ag_budget"] = cfg.ag_budget;
    j["aw_budget"] = cfg.aw_budget;
    j["mpc"] = mpc_to_json(cfg.mpc);
    return j.dump(2) + "\n";
}

std::uint64_t pipeline_config_hash(const PipelineConfig& cfg) {
    return fnv1a(pipeline_config_json(cfg));
}

// ---------------------------------------------------------------------------
// Scenario corpus

namespace {

double snap10(double x) { return std::round(x / 10.0) * 10.0; }

Scenario synth_route(int index, const CorpusSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed("corpus-" + std::to_string(index), seed));
    auto u = [&rng] { return canonical01(rng); };

    Scenario sc;
    sc.name = "synth_" + std::to_string(index);
    Route& r = sc.route;

    const int half_kms = std::max(0, static_cast<int>(
        std::floor((spec.max_length_m - spec.min_length_m) / 500.0)));
    const int pick = std::min(half_kms, static_cast<int>(std::floor(u() * (half_kms + 1))));
    r.length_m = spec.min_length_m + 500.0 * pick;

    r.limits = {{0.0, 17.0}};
    if (u() < 0.5 && r.length_m >= 1500.0) {
        r.limits.push_back({snap10(r.length_m * 0.45), 15.0});
    }

    const int cap = std::clamp(static_cast<int>(r.length_m / 1000.0), 1, spec.max_lights);
    const int n_lights = 1 + std::min(cap - 1, static_cast<int>(std::floor(u() * cap)));
    const double lo = 150.0, hi = r.length_m - 150.0;
    const double segment = (hi - lo) / n_lights;
    for (int k = 0; k < n_lights; ++k) {
        TrafficLight L;
        L.position_m = snap10(lo + segment * k + u() * std::max(0.0, segment - 120.0));
        L.cycle_s = 50.0 + std::floor(u() * 31.0);
        L.green_s = std::clamp(std::round(L.cycle_s * (0.4 + 0.25 * u())), 10.0, L.cycle_s - 5.0);
        L.offset_s = std::floor(u() * L.cycle_s);
        r.lights.push_back(L);
    }

    if (index % 2 == 1) {
        TrafficJam jam;
        jam.x_start_m = snap10(r.length_m * 0.55);
        jam.x_end_m = snap10(r.length_m * 0.90);
        jam.t_start_s = 0.0;
        jam.t_end_s = 4000.0;  // covers any plausible trip through the route
        jam.density_veh_per_km = 80.0 + std::floor(u() * 41.0);
        jam.greenshield_c1 = 0.1;
        jam.greenshield_c2 = 20.0;
        r.jams.push_back(jam);
    }

    sc.ego_v0_mps = 8.0 + std::round(u() * 8.0) * 0.5;  // 8..12 in half-steps
    sc.ego_soc0 = 0.30;
    sc.validate();
    return sc;
}

// The solved route plan re-cast as a lead: samples at every node, doubled at
// red dwells so position holds while time passes, the whole thing shifted
// earlier by shift_s. Trapezoid consistency is inherited from the arcs.
LeadTrajectory lead_from_plan(const Trajectory& traj, const Scenario& sc, double shift_s) {
    LeadTrajectory lead;
    lead.source = "dp";
    const double ds = sc.route.ds_m;
    lead.samples.push_back({sc.ego_t0_s - shift_s, 0.0, sc.ego_v0_mps});
    const int n = static_cast<int>(traj.points.size());
    for (int k = 1; k <= n; ++k) {
        const EgoState& st = (k < n) ? traj.points[k].state : traj.final_state;
        const double wait_in = traj.points[k - 1].wait_s;
        const double x = k * ds;
        if (wait_in > 0.0) {
            lead.samples.push_back({st.time_s - wait_in - shift_s, x, st.v_mps});
        }
        lead.samples.push_back({st.time_s - shift_s, x, st.v_mps});
    }
    lead.validate();
    return lead;
}

}  // namespace

std::vector<CorpusEntry> cmd_gen_scenarios(const PipelineConfig& cfg) {
    cfg.validate();
    const VehicleParams p = cfg.vehicle();
    ensure_dir(cfg.scenario_dir());

    std::vector<CorpusEntry> out;
    for (int i = 0; i < cfg.corpus.variants; ++i) {
        Scenario sc = synth_route(i, cfg.corpus, cfg.seed);

        const StateGrid grid = build_grid(sc, p, cfg.train_grid);
        const DpProblem prob(sc, p, grid, solver_config(cfg));
        const ValueFunction vf = backward_induction(prob);
        const Trajectory plan = extract_trajectory(prob, vf);

        const std::string lead_name = sc.name + "_lead.csv";
        LeadTrajectory lead = lead_from_plan(plan, sc, cfg.corpus.lead_shift_s);
        save_lead_csv(lead, cfg.scenario_dir() + "/" + lead_name);
        sc.lead = std::move(lead);
        sc.lead_csv = lead_name;

        const std::string file = cfg.scenario_dir() + "/" + sc.name + ".ini";
        save_scenario(sc, file);
        out.push_back(CorpusEntry{file, std::move(sc)});
    }
    return out;
}

std::vector<CorpusEntry> corpus_scenarios(const PipelineConfig& cfg) {
    cfg.validate();
    std::vector<std::string> files = cfg.scenario_files;
    if (files.empty()) {
        for (int i = 0; i < cfg.corpus.variants; ++i) {
            const std::string f = cfg.scenario_dir() + "/synth_" + std::to_string(i) + ".ini";
            if (!fs::exists(f)) {
                throw ConfigError("missing scenario file '" + f + "' (run gen-scenarios)");
            }
            files.push_back(f);
        }
    }
    std::vector<CorpusEntry> out;
    for (const std::string& f : files) {
        if (!fs::exists(f)) throw ConfigError("missing scenario file '" + f + "'");
        out.push_back(CorpusEntry{f, load_scenario(f)});
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t k = i + 1; k < out.size(); ++k) {
            if (out[i].scenario.name == out[k].scenario.name) {
                throw ConfigError("duplicate scenario name '" + out[i].scenario.name + "'");
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Value-function corpus

SolveDpOutcome cmd_solve_dp(const PipelineConfig& cfg) {
    const std::vector<CorpusEntry> corpus = corpus_scenarios(cfg);
    const VehicleParams p = cfg.vehicle();
    ensure_dir(cfg.vf_dir());

    SolveDpOutcome out;
    for (const CorpusEntry& entry : corpus) {
        for (const char* variant : {"nojam", "jam"}) {
            SolveEntry e;
            e.scenario = entry.scenario.name;
            e.variant = variant;
            Scenario sc = entry.scenario;
            if (e.variant == "nojam") {
                sc.route.jams.clear();
                sc.lead.reset();
                sc.lead_csv.clear();
            }
            try {
                const StateGrid grid = build_grid(sc, p, cfg.train_grid);
                const DpProblem prob(sc, p, grid, solver_config(cfg));
                const ValueFunction vf = backward_induction(prob);
                const Trajectory plan = extract_trajectory(prob, vf);
                e.vf_file = vf_basename(e.scenario, variant);
                const std::string path = cfg.vf_dir() + "/" + e.vf_file;
                save_value_function(vf, path);
                e.status = "ok";
                e.cost = plan.cost;
                e.efc_g = plan.efc_g;
                e.time_s = plan.time_s;
                e.final_soc = plan.final_soc;
                e.file_hash = hash_file(path);
            } catch (const std::exception& ex) {
                e.status = ex.what();
                ++out.failures;
            }
            out.entries.push_back(std::move(e));
        }
    }

    std::ostringstream csv;
    csv << "scenario,variant,status,cost,efc_g,time_s,final_soc,file,hash\n";
    for (const SolveEntry& e : out.entries) {
        std::string status = e.status;
        std::replace(status.begin(), status.end(), ',', ';');
        csv << e.scenario << ',' << e.variant << ',' << status << ',';
        if (e.status == "ok") {
            csv << fmt_g(e.cost) << ',' << fmt_g(e.efc_g) << ',' << fmt_g(e.time_s) << ','
                << fmt_g(e.final_soc) << ',' << e.vf_file << ',' << hex64(e.file_hash);
        } else {
            csv << ",,,,,";
        }
        csv << '\n';
    }
    out.summary_csv = cfg.vf_dir() + "/summary.csv";
    write_text_file(out.summary_csv, csv.str());
    return out;
}

// ---------------------------------------------------------------------------
// Training

TrainOutcome cmd_train(const PipelineConfig& cfg, bool aw) {
    const std::vector<CorpusEntry> corpus = corpus_scenarios(cfg);
    const std::string tag = aw ? "aw" : "ag";
    ensure_dir(cfg.net_dir());

    // Keep the (possibly stripped) scenarios alive next to their value
    // functions; DatasetSource holds pointers.
    std::vector<Scenario> scenarios;
    std::vector<ValueFunction> vfs;
    scenarios.reserve(corpus.size());
    vfs.reserve(corpus.size());
    std::uint64_t corpus_hash = fnv1a(tag);
    for (const CorpusEntry& entry : corpus) {
        Scenario sc = entry.scenario;
        if (!aw) {
            sc.route.jams.clear();
            sc.lead.reset();
            sc.lead_csv.clear();
        }
        const std::string vf_path =
            cfg.vf_dir() + "/" + vf_basename(sc.name, aw ? "jam" : "nojam");
        if (!fs::exists(vf_path)) {
            throw ConfigError("missing value function '" + vf_path + "' (run solve-dp)");
        }
        corpus_hash = fnv1a(scenario_text(sc), corpus_hash);
        corpus_hash = fnv1a(&(vfs.emplace_back(load_value_function(vf_path)).scenario_hash),
                            sizeof(std::uint64_t), corpus_hash);
        scenarios.push_back(std::move(sc));
    }

    std::vector<DatasetSource> sources;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        sources.push_back(DatasetSource{&scenarios[i], &vfs[i]});
    }
    const Dataset ds = build_dataset(sources, aw, aw ? cfg.aw_budget : cfg.ag_budget,
                                     mix_seed("dataset-" + tag, cfg.seed));
    if (ds.size() == 0) throw ConfigError("training dataset is empty");

    NetConfig nc = cfg.net;
    nc.seed = mix_seed("train-" + tag, cfg.seed);
    TrainOutcome out;
    out.aw = aw;
    out.dataset_rows = ds.size();
    const TerminalCostNet net = train_net(ds, nc, cfg.gamma, hex64(corpus_hash), &out.report);

    out.net_file = cfg.net_dir() + "/" + tag + ".net";
    save_net(net, out.net_file);

    std::ostringstream csv;
    csv << "epoch,train_mse,val_mse\n";
    for (std::size_t i = 0; i < out.report.epochs.size(); ++i) {
        csv << i << ',' << fmt_g(out.report.epochs[i].train_mse) << ','
            << fmt_g(out.report.epochs[i].val_mse) << '\n';
    }
    out.epochs_csv = cfg.net_dir() + "/" + tag + "_epochs.csv";
    write_text_file(out.epochs_csv, csv.str());

    json rep;
    rep["variant"] = tag;
    rep["dataset_rows"] = out.dataset_rows;
    rep["train_rows"] = out.report.train_rows;
    rep["val_rows"] = out.report.val_rows;
    rep["holdout_rel_rmse"] = out.report.holdout_rel_rmse;
    rep["epochs"] = out.report.epochs.size();
    rep["net_file"] = basename_of(out.net_file);
    rep["net_hash"] = hex64(hash_file(out.net_file));
    rep["corpus_hash"] = hex64(corpus_hash);
    rep["config_hash"] = hex64(pipeline_config_hash(cfg));
    out.report_json = cfg.net_dir() + "/" + tag + "_report.json";
    write_text_file(out.report_json, rep.dump(2) + "\n");
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark

namespace {

Scenario bench_scenario(const std::string& id) {
    if (id == "route1" || id == "route2") return build_scenario(id);
    return load_scenario(id);
}

std::string audit_note(const ViolationReport& rep) {
    if (rep.count == 0) return "";
    std::string note = "constraint audit: " + std::to_string(rep.count) + " violation(s)";
    if (!rep.notes.empty()) note += "; first: " + rep.notes.front();
    return note;
}

// Full-route reference solution; the value function is cached on disk keyed
// by everything that shapes it.
ControllerRun run_dp_reference(const PipelineConfig& cfg, const Scenario& sc,
                               const VehicleParams& p, ValueFunction& vf_out) {
    ControllerRun run;
    run.controller = "dp";

    std::uint64_t key = fnv1a(scenario_text(sc));
    key = fnv1a(grid_to_json(cfg.bench_grid).dump(), key);
    key = fnv1a(fmt_g(cfg.gamma), key);
    key = fnv1a(fmt_g(cfg.mpc.terminal.w_v) + fmt_g(cfg.mpc.terminal.w_soc) +
                    fmt_g(cfg.mpc.terminal.soc_floor),
                key);
    const std::string vf_path = cfg.bench_dir() + "/" + sc.name + "_dp_" + hex64(key) + ".vf";

    const StateGrid grid = build_grid(sc, p, cfg.bench_grid);
    const DpProblem prob(sc, p, grid, solver_config(cfg));
    bool cached = false;
    if (fs::exists(vf_path)) {
        try {
            vf_out = load_value_function(vf_path);
            cached = true;
        } catch (const ConfigError&) {
            // stale or truncated cache entry, fall through and resolve
        }
    }
    if (!cached) {
        vf_out = backward_induction(prob);
        save_value_function(vf_out, vf_path);
    }

    const Trajectory traj = extract_trajectory(prob, vf_out);
    const ViolationReport audit = check_trajectory(prob, traj);
    run.ok = audit.count == 0;
    run.note = audit_note(audit);
    run.efc_g = traj.efc_g;
    run.time_s = traj.time_s;
    run.final_soc = traj.final_soc;
    run.cost = traj.cost;

    run.traj_csv = sc.name + "_dp_traj.csv";
    save_trajectory_csv(traj, sc.route, "dp", cfg.bench_dir() + "/" + run.traj_csv);
    run.series_csv = sc.name + "_dp_series.csv";
    save_series_csv(traj, sc, p, cfg.bench_dir() + "/" + run.series_csv);
    return run;
}

ControllerRun run_mpc_controller(const PipelineConfig& cfg, const Scenario& sc,
                                 const VehicleParams& p, TerminalSource src,
                                 const TerminalOracle& oracle) {
    ControllerRun run;
    run.controller = src == TerminalSource::AgNn ? "ag_nn_mpc" : "ensemble_mpc";
    const std::string tag = src == TerminalSource::AgNn ? "ag" : "ensemble";

    MpcConfig m = cfg.mpc;
    m.ds_m = sc.route.ds_m;
    m.gamma = cfg.gamma;
    m.terminal_cost_source = src;
    m.jobs = cfg.jobs;

    const ClosedLoopResult res = run_closed_loop(sc, p, m, oracle);
    run.efc_g = res.traj.efc_g;
    run.time_s = res.traj.time_s;
    run.final_soc = res.traj.final_soc;
    run.cost = res.cost;

    if (res.aborted) {
        run.ok = false;
        run.note = "aborted at step " + std::to_string(res.abort_step) + ": " + res.abort_reason;
    } else {
        const DpProblem plant(sc, p, build_grid(sc, p, m.grid),
                              DpConfig{m.gamma, m.t_gap_s, m.terminal, 1});
        const ViolationReport audit = check_trajectory(plant, res.traj);
        run.ok = audit.count == 0;
        run.note = audit_note(audit);
    }

    run.traj_csv = sc.name + "_" + tag + "_traj.csv";
    save_closed_loop_csv(res, sc.route, cfg.bench_dir() + "/" + run.traj_csv);
    run.series_csv = sc.name + "_" + tag + "_series.csv";
    save_series_csv(res.traj, sc, p, cfg.bench_dir() + "/" + run.series_csv);
    run.diag_jsonl = sc.name + "_" + tag + "_mpc.jsonl";
    save_diagnostics_jsonl(res, cfg.bench_dir() + "/" + run.diag_jsonl);
    return run;
}

json controller_json(const ControllerRun& run) {
    json j;
    j["ok"] = run.ok;
    j["note"] = run.note;
    j["efc_g"] = run.efc_g;
    j["time_s"] = run.time_s;
    j["final_soc_pct"] = run.final_soc * 100.0;
    j["cost"] = run.cost;
    json f;
    f["traj"] = run.traj_csv;
    f["series"] = run.series_csv;
    if (!run.diag_jsonl.empty()) f["diag"] = run.diag_jsonl;
    j["files"] = f;
    return j;
}

}  // namespace

std::string benchmark_report_text(const BenchmarkReport& rep) {
    std::ostringstream os;
    os << "Controller benchmark (code " << rep.code_version << ")\n";
    os << "config " << hex64(rep.config_hash) << "  seed " << rep.seed << "\n";
    os << "nets ag " << hex64(rep.ag_net_hash) << "  aw " << hex64(rep.aw_net_hash) << "\n\n";
    for (const RouteBenchmark& rb : rep.routes) {
        os << rb.route << "  [scenario " << hex64(rb.scenario_hash) << "]\n";
        os << "  controller      status    EFC [g]    time [s]   final SoC [%]\n";
        for (const ControllerRun* run : {&rb.dp, &rb.ag, &rb.ensemble}) {
            char line[160];
            std::snprintf(line, sizeof line, "  %-14s  %-6s  %9s  %10s  %12s\n",
                          run->controller.c_str(), run->ok ? "ok" : "FAIL",
                          fixed2(run->efc_g).c_str(), fixed2(run->time_s).c_str(),
                          fixed2(run->final_soc * 100.0).c_str());
            os << line;
        }
        os << "  ensemble vs ag: EFC " << signed_pct(rb.efc_delta_pct) << ", time "
           << signed_pct(rb.time_delta_pct) << "\n";
        os << "  EFC ordering dp <= ensemble <= ag: " << (rb.ordering_ok ? "yes" : "NO") << "\n";
        for (const ControllerRun* run : {&rb.dp, &rb.ag, &rb.ensemble}) {
            if (!run->note.empty()) os << "  note[" << run->controller << "]: " << run->note << "\n";
        }
        os << "\n";
    }
    os << "Absolute fuel and time figures are properties of the built-in powertrain\n"
          "surrogate; cross-controller orderings and relative deltas are the\n"
          "comparable signals.\n";
    return os.str();
}

std::string benchmark_report_json_text(const BenchmarkReport& rep) {
    json j;
    j["all_ok"] = rep.all_ok;
    j["code_version"] = rep.code_version;
    j["config_hash"] = hex64(rep.config_hash);
    j["seed"] = rep.seed;
    json nets;
    nets["ag_hash"] = hex64(rep.ag_net_hash);
    nets["aw_hash"] = hex64(rep.aw_net_hash);
    j["nets"] = nets;
    json routes = json::array();
    for (const RouteBenchmark& rb : rep.routes) {
        json r;
        r["name"] = rb.route;
        r["scenario_hash"] = hex64(rb.scenario_hash);
        json ctl;
        ctl["dp"] = controller_json(rb.dp);
        ctl["ag_nn_mpc"] = controller_json(rb.ag);
        ctl["ensemble_mpc"] = controller_json(rb.ensemble);
        r["controllers"] = ctl;
        json d;
        d["efc_pct"] = rb.efc_delta_pct;
        d["time_pct"] = rb.time_delta_pct;
        r["deltas_ensemble_vs_ag"] = d;
        r["efc_ordering_ok"] = rb.ordering_ok;
        routes.push_back(r);
    }
    j["routes"] = routes;
    return j.dump(2) + "\n";
}

BenchmarkReport cmd_benchmark(const PipelineConfig& cfg) {
    cfg.validate();
    const VehicleParams p = cfg.vehicle();
    ensure_dir(cfg.bench_dir());

    const std::string ag_path = cfg.net_dir() + "/ag.net";
    const std::string aw_path = cfg.net_dir() + "/aw.net";
    for (const std::string& path : {ag_path, aw_path}) {
        if (!fs::exists(path)) {
            throw ConfigError("missing net '" + path + "' (run train)");
        }
    }
    const TerminalCostNet ag_net = load_net(ag_path);
    const TerminalCostNet aw_net = load_net(aw_path);

    BenchmarkReport rep;
    rep.config_hash = pipeline_config_hash(cfg);
    rep.seed = cfg.seed;
    rep.ag_net_hash = hash_file(ag_path);
    rep.aw_net_hash = hash_file(aw_path);
    rep.all_ok = true;

    for (const std::string& id : cfg.bench_scenarios) {
        const Scenario sc = bench_scenario(id);
        RouteBenchmark rb;
        rb.route = sc.name;
        rb.scenario_hash = fnv1a(scenario_text(sc));

        ValueFunction dp_vf;
        rb.dp = run_dp_reference(cfg, sc, p, dp_vf);

        TerminalOracle ag_oracle;
        ag_oracle.ag = &ag_net;
        rb.ag = run_mpc_controller(cfg, sc, p, TerminalSource::AgNn, ag_oracle);

        TerminalOracle ens_oracle;
        ens_oracle.ag = &ag_net;
        ens_oracle.aw = &aw_net;
        rb.ensemble = run_mpc_controller(cfg, sc, p, TerminalSource::EnsembleNn, ens_oracle);

        if (rb.ag.ok && rb.ensemble.ok) {
            rb.efc_delta_pct = (rb.ensemble.efc_g - rb.ag.efc_g) / rb.ag.efc_g * 100.0;
            rb.time_delta_pct = (rb.ensemble.time_s - rb.ag.time_s) / rb.ag.time_s * 100.0;
        }
        rb.ordering_ok = rb.dp.ok && rb.ag.ok && rb.ensemble.ok &&
                         rb.dp.efc_g <= rb.ensemble.efc_g + 1e-9 &&
                         rb.ensemble.efc_g <= rb.ag.efc_g + 1e-9;

        const bool jam_route = !sc.route.jams.empty();
        if (!rb.dp.ok || !rb.ag.ok || !rb.ensemble.ok || (jam_route && !rb.ordering_ok)) {
            rep.all_ok = false;
        }
        rep.routes.push_back(std::move(rb));
    }

    rep.text = benchmark_report_text(rep);
    rep.report_txt = cfg.bench_dir() + "/report.txt";
    write_text_file(rep.report_txt, rep.text);
    rep.report_json = cfg.bench_dir() + "/report.json";
    write_text_file(rep.report_json, benchmark_report_json_text(rep));
    return rep;
}

// ---------------------------------------------------------------------------
// Plot series

void save_series_csv(const Trajectory& traj, const Scenario& sc, const VehicleParams& p,
                     const std::string& path) {
    const PowerFlows idle = power_split(0.0, 0.0, false, p);
    const double ds = sc.route.ds_m;
    std::ostringstream os;
    os << "x_m,v_mps,soc,efc_cum_g,lead_gap_m\n";
    const int n = static_cast<int>(traj.points.size());
    double efc = 0.0;
    for (int k = 0; k <= n; ++k) {
        const EgoState& st = (k < n) ? traj.points[k].state : traj.final_state;
        os << fmt_g(k * ds) << ',' << fmt_g(st.v_mps) << ',' << fmt_g(st.soc) << ','
           << fmt_g(efc) << ',';
        if (sc.lead && st.time_s >= sc.lead->t_min() && st.time_s <= sc.lead->t_max()) {
            os << fmt_g(sc.lead->pos_at(st.time_s) - k * ds);
        }
        os << '\n';
        if (k < n) {
            const TrajectoryPoint& pt = traj.points[k];
            efc += pt.flows.equiv_fuel_rate_gps * pt.dt_move_s +
                   idle.equiv_fuel_rate_gps * (pt.wait_s + pt.hold_s);
        }
    }
    write_text_file(path, os.str());
}

// ---------------------------------------------------------------------------
// Tiny exhaustive instances

TinyInstance make_tiny_instance(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto u = [&rng] { return canonical01(rng); };

    TinyInstance ti;
    Scenario& sc = ti.sc;
    sc.name = "tiny_" + hex64(seed);
    Route& r = sc.route;
    r.length_m = 30.0;
    r.limits = {{0.0, 12.0 + std::floor(u() * 6.0)}};

    if (u() < 0.5) {
        TrafficLight L;
        L.position_m = u() < 0.5 ? 10.0 : 20.0;
        L.cycle_s = 12.0 + std::floor(u() * 19.0);
        L.green_s = std::clamp(std::round(L.cycle_s * (0.3 + 0.4 * u())), 4.0, L.cycle_s - 2.0);
        L.offset_s = std::floor(u() * L.cycle_s);
        r.lights.push_back(L);
    }
    if (u() < 0.4) {
        TrafficJam jam;
        jam.x_start_m = u() < 0.5 ? 0.0 : 10.0;
        jam.x_end_m = jam.x_start_m + 20.0;
        jam.t_start_s = 0.0;
        jam.t_end_s = 100.0;
        jam.greenshield_c2 = 20.0;
        jam.greenshield_c1 = 0.1;
        jam.density_veh_per_km = 100.0 + std::floor(u() * 41.0);  // 6..10 m/s
        r.jams.push_back(jam);
    }
    if (u() < 0.4) {
        LeadTrajectory lead;
        const double v = 5.0 + 3.0 * u();
        const double x0 = 25.0 + 10.0 * u();
        for (double t = -8.0; t <= 10.01; t += 0.5) {
            lead.samples.push_back({t, x0 + v * t, v});
        }
        lead.validate();
        sc.lead = std::move(lead);
    }

    sc.ego_v0_mps = 6.0 + 2.0 * std::floor(u() * 3.0);  // even, on the v axis
    sc.ego_soc0 = 0.30;

    GridSpec& g = ti.spec;
    g.dv_mps = 2.0;
    g.dsoc = 0.01;
    g.soc_below = 0.03;
    g.soc_above = 0.02;
    g.dt_s = 2.0;
    g.slow_avg_mps = 3.0;
    g.time_slack_s = 10.0;
    g.interp = InterpMode::Nearest;
    g.accel_grid = {-3.0, -1.5, 0.0, 1.0, 2.0};
    return ti;
}

// ---------------------------------------------------------------------------
// Verify

namespace {

using PropertyFn = PropertyResult (*)(const PipelineConfig&);

PropertyResult prop_bellman_residual(const PipelineConfig& cfg) {
    PropertyResult pr;
    pr.name = "bellman-residual";
    pr.seed = cfg.seed;

    Scenario sc;
    sc.name = "residual_route";
    sc.route.length_m = 500.0;
    sc.route.limits = {{0.0, 17.0}};
    sc.route.lights = {{200.0, 40.0, 18.0, 6.0}, {380.0, 50.0, 20.0, 25.0}};
    sc.route.jams = {{300.0, 450.0, 0.0, 1000.0, 100.0, 0.1, 20.0}};
    sc.ego_v0_mps = 10.0;

    const VehicleParams p = cfg.vehicle();
    const GridSpec spec;  // stock axes, 50 steps
    const DpProblem prob(sc, p, build_grid(sc, p, spec), solver_config(cfg));
    const ValueFunction vf = backward_induction(prob);
    const double res = bellman_residual_max(prob, vf);
    pr.passed = res == 0.0;
    pr.detail = "max residual " + fmt_g(res) + " over " + std::to_string(vf.grid.steps) + " steps";
    return pr;
}

PropertyResult prop_oracle_equivalence(const PipelineConfig& cfg) {
    PropertyResult pr;
    pr.name = "oracle-equivalence";
    int agree_value = 0, agree_infeasible = 0;
    for (int k = 0; k < 12; ++k) {
        const std::uint64_t inst_seed = mix_seed("oracle-" + std::to_string(k), cfg.seed);
        pr.seed = inst_seed;
        const TinyInstance ti = make_tiny_instance(inst_seed);
        const VehicleParams p = cfg.vehicle();
        const DpProblem prob(ti.sc, p, build_grid(ti.sc, p, ti.spec), solver_config(cfg));

        double dp_cost = kInf;
        bool dp_ok = true;
        try {
            const ValueFunction vf = backward_induction(prob);
            if (!vf.try_value(0, prob.start_state(), dp_cost)) dp_ok = false;
        } catch (const NoSolutionError&) {
            dp_ok = false;
        }
        double oracle_cost = kInf;
        bool oracle_ok = true;
        try {
            oracle_cost = brute_force_oracle(prob).cost;
        } catch (const NoSolutionError&) {
            oracle_ok = false;
        }

        if (dp_ok != oracle_ok || (dp_ok && dp_cost != oracle_cost)) {
            pr.passed = false;
            pr.detail = "instance " + std::to_string(k) + ": sweep " +
                        (dp_ok ? fmt_g(dp_cost) : std::string("infeasible")) + " vs search " +
                        (oracle_ok ? fmt_g(oracle_cost) : std::string("infeasible"));
            return pr;
        }
        dp_ok ? ++agree_value : ++agree_infeasible;
    }
    pr.passed = true;
    pr.seed = cfg.seed;
    pr.detail = std::to_string(agree_value) + " value matches, " +
                std::to_string(agree_infeasible) + " agreed infeasible";
    return pr;
}

PropertyResult prop_optimality_rollout(const PipelineConfig& cfg) {
    PropertyResult pr;
    pr.name = "optimality-rollout";
    pr.seed = cfg.seed;

    Scenario sc;
    sc.name = "rollout_route";
    sc.route.length_m = 800.0;
    sc.route.limits = {{0.0, 17.0}};
    sc.route.lights = {{300.0, 60.0, 25.0, 10.0}, {600.0, 50.0, 22.0, 35.0}};
    sc.ego_v0_mps = 10.0;

    const VehicleParams p = cfg.vehicle();
    GridSpec spec;
    spec.dt_s = 0.5;
    const DpProblem prob(sc, p, build_grid(sc, p, spec), solver_config(cfg));
    const ValueFunction vf = backward_induction(prob);
    const double j0 = vf.value(0, prob.start_state());

    MpcConfig m = cfg.mpc;
    m.ds_m = sc.route.ds_m;
    m.gamma = cfg.gamma;
    m.terminal_cost_source = TerminalSource::ExactDp;
    m.grid = spec;
    m.jobs = 1;
    TerminalOracle oracle;
    oracle.full_route = &vf;
    const ClosedLoopResult res = run_closed_loop(sc, p, m, oracle);

    pr.passed = !res.aborted && res.cost <= j0 * 1.01 + 1e-9 && res.cost >= j0 * 0.8;
    pr.detail = "plan " + fmt_g(j0) + ", rolling-horizon " + fmt_g(res.cost) +
                (res.aborted ? " (aborted: " + res.abort_reason + ")" : "");
    return pr;
}

PropertyResult prop_gradient_consistency(const PipelineConfig& cfg) {
    PropertyResult pr;
    pr.name = "gradient-consistency";
    pr.seed = mix_seed("grad", cfg.seed);

    std::mt19937_64 rng(pr.seed);
    auto uni = [&rng](double lo, double hi) { return lo + (hi - lo) * canonical01(rng); };

    TerminalCostNet net;
    net.layer_sizes = {kAgFeatureCount, 24, 1};
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        const int in = net.layer_sizes[l], out_n = net.layer_sizes[l + 1];
        std::vector<double> W(static_cast<std::size_t>(in) * out_n), b(out_n);
        for (double& w : W) w = uni(-0.6, 0.6);
        for (double& v : b) v = uni(-0.1, 0.1);
        net.W.push_back(std::move(W));
        net.b.push_back(std::move(b));
    }
    for (int k = 0; k < kAgFeatureCount; ++k) {
        net.in_mean.push_back(uni(-1.0, 1.0));
        net.in_scale.push_back(uni(0.5, 2.0));
    }
    net.label_mean = 40.0;
    net.label_scale = 15.0;
    net.gamma = cfg.gamma;
    net.validate();

    int bad = 0;
    double worst = 0.0;
    for (int ptn = 0; ptn < 100; ++ptn) {
        double x[kAgFeatureCount];
        for (double& v : x) v = uni(-2.0, 2.0);
        const std::vector<double> g = net.input_gradient(x);
        for (int k = 0; k < kAgFeatureCount; ++k) {
            const double h = 1e-5 * std::max(1.0, std::abs(x[k]));
            const double keep = x[k];
            x[k] = keep + h;
            const double up = net.forward_raw(x);
            x[k] = keep - h;
            const double dn = net.forward_raw(x);
            x[k] = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double rel = std::abs(g[k] - fd) / std::max(1e-3, std::abs(g[k]) + std::abs(fd));
            worst = std::max(worst, rel);
            if (rel > 1e-4) ++bad;
        }
    }
    pr.passed = bad == 0;
    pr.detail = "worst relative gap " + fmt_g(worst) + " over 100 points";
    return pr;
}

PropertyResult prop_constraint_safety(const PipelineConfig& cfg) {
    PropertyResult pr;
    pr.name = "constraint-safety";
    pr.seed = cfg.seed;

    Scenario sc;
    sc.name = "safety_route";
    sc.route.length_m = 600.0;
    sc.route.limits = {{0.0, 17.0}};
    sc.route.lights = {{250.0, 55.0, 24.0, 12.0}};
    sc.route.jams = {{380.0, 550.0, 0.0, 1000.0, 100.0, 0.1, 20.0}};
    LeadTrajectory lead;
    for (double t = -10.0; t <= 80.01; t += 1.0) {
        lead.samples.push_back({t, 40.0 + 9.0 * t, 9.0});
    }
    lead.validate();
    sc.lead = std::move(lead);
    sc.ego_v0_mps = 13.0;

    const VehicleParams p = cfg.vehicle();
    const GridSpec spec;
    const DpProblem prob(sc, p, build_grid(sc, p, spec), solver_config(cfg));
    const ValueFunction vf = backward_induction(prob);

    MpcConfig m = cfg.mpc;
    m.ds_m = sc.route.ds_m;
    m.gamma = cfg.gamma;
    m.terminal_cost_source = TerminalSource::ExactDp;
    m.grid = spec;
    m.jobs = 1;
    TerminalOracle oracle;
    oracle.full_route = &vf;
    const ClosedLoopResult res = run_closed_loop(sc, p, m, oracle);

    if (res.aborted) {
        pr.passed = false;
        pr.detail = "closed loop aborted: " + res.abort_reason;
        return pr;
    }
    const ViolationReport audit = check_trajectory(prob, res.traj);
    int gap_violations = 0;
    const LeadTrajectory& ld = *sc.lead;
    for (std::size_t k = 0; k < res.traj.points.size(); ++k) {
        const double x = k * sc.route.ds_m;
        if (x < ld.x_min() || x > ld.x_max()) continue;
        if (res.traj.points[k].state.time_s < ld.time_at(x) + m.t_gap_s - 1e-9) ++gap_violations;
    }
    pr.passed = audit.count == 0 && gap_violations == 0;
    pr.detail = std::to_string(audit.count) + " audit violation(s), " +
                std::to_string(gap_violations) + " headway violation(s) over " +
                std::to_string(res.traj.points.size()) + " steps";
    return pr;
}

PropertyResult prop_jam_ordering(const PipelineConfig& cfg) {
    PropertyResult pr;
    pr.name = "jam-ordering";
    pr.seed = cfg.seed;

    TrafficJam a{0, 1, 0, 1, 50.0, 0.1, 20.0};
    TrafficJam b = a;
    b.density_veh_per_km = 80.0;
    const double slope =
        (jam_speed(b) - jam_speed(a)) / (b.density_veh_per_km - a.density_veh_per_km);
    const bool affine_ok = std::abs(slope - (-a.greenshield_c1)) <= 1e-9;

    Scenario sc;
    sc.name = "ordering_route";
    sc.route.length_m = 600.0;
    sc.route.limits = {{0.0, 17.0}};
    sc.route.lights = {{250.0, 60.0, 25.0, 15.0}};
    sc.ego_v0_mps = 10.0;

    const VehicleParams p = cfg.vehicle();
    const GridSpec spec;
    const DpProblem free_prob(sc, p, build_grid(sc, p, spec), solver_config(cfg));
    const double j_free = backward_induction(free_prob).value(0, free_prob.start_state());

    sc.route.jams = {{300.0, 500.0, 0.0, 1000.0, 100.0, 0.1, 20.0}};
    const DpProblem jam_prob(sc, p, build_grid(sc, p, spec), solver_config(cfg));
    const double j_jam = backward_induction(jam_prob).value(0, jam_prob.start_state());

    pr.passed = affine_ok && j_jam >= j_free - 1e-9;
    pr.detail = "speed-density slope " + fmt_g(slope) + "; cost " + fmt_g(j_free) +
                " free vs " + fmt_g(j_jam) + " jammed";
    return pr;
}

const std::vector<std::pair<std::string, PropertyFn>>& property_table() {
    static const std::vector<std::pair<std::string, PropertyFn>> table = {
        {"bellman-residual", &prop_bellman_residual},
        {"oracle-equivalence", &prop_oracle_equivalence},
        {"optimality-rollout", &prop_optimality_rollout},
        {"gradient-consistency", &prop_gradient_consistency},
        {"constraint-safety", &prop_constraint_safety},
        {"jam-ordering", &prop_jam_ordering},
    };
    return table;
}

}  // namespace

std::vector<std::string> verify_property_names() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : property_table()) names.push_back(name);
    return names;
}

VerifyOutcome cmd_verify(const PipelineConfig& cfg, bool list_only) {
    cfg.validate();
    VerifyOutcome out;
    if (list_only) {
        for (const auto& [name, fn] : property_table()) {
            out.results.push_back(PropertyResult{name, true, 0, "(listed, not run)"});
        }
        out.all_passed = true;
        return out;
    }
    out.all_passed = true;
    for (const auto& [name, fn] : property_table()) {
        PropertyResult pr = fn(cfg);
        out.all_passed = out.all_passed && pr.passed;
        out.results.push_back(std::move(pr));
    }

    std::ostringstream txt;
    for (const PropertyResult& pr : out.results) {
        txt << (pr.passed ? "[PASS] " : "[FAIL] ") << pr.name << " (seed " << pr.seed << "): "
            << pr.detail << "\n";
    }
    txt << (out.all_passed ? "all properties passed\n" : "property failures present\n");
    ensure_dir(cfg.out_dir + "/verify");
    write_text_file(cfg.out_dir + "/verify/report.txt", txt.str());
    return out;
}

}  // namespace ecodrive
