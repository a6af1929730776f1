#include "ecodrive/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "ecodrive/features.hpp"

namespace ecodrive {

std::string to_string(TerminalSource src) {
    switch (src) {
        case TerminalSource::ExactDp: return "exact_dp";
        case TerminalSource::AgNn: return "ag_nn";
        case TerminalSource::EnsembleNn: return "ensemble_nn";
    }
    throw ConfigError("mpc: unknown terminal cost source value");
}

TerminalSource terminal_source_from(const std::string& name) {
    if (name == "exact_dp") return TerminalSource::ExactDp;
    if (name == "ag_nn") return TerminalSource::AgNn;
    if (name == "ensemble_nn") return TerminalSource::EnsembleNn;
    throw ConfigError("mpc: unknown terminal cost source '" + name + "'");
}

int MpcConfig::horizon_steps() const {
    return static_cast<int>(std::llround(horizon_m / ds_m));
}

void MpcConfig::validate() const {
    auto bad = [](const std::string& what) { throw ConfigError("mpc config: " + what); };
    if (ds_m <= 0.0) bad("step size must be > 0");
    if (horizon_m <= 0.0) bad("horizon must be > 0");
    const int hs = horizon_steps();
    if (hs < 1 || std::abs(hs * ds_m - horizon_m) > 1e-9 * std::max(1.0, horizon_m)) {
        bad("horizon must be a whole number of steps");
    }
    if (gamma < 0.0 || gamma > 1.0) bad("gamma outside [0, 1]");
    if (t_gap_s < 0.0) bad("headway gap must be >= 0");
    if (proxy_projection_m < 0.0) bad("proxy projection must be >= 0");
    if (sensing_m < 0.0) bad("sensing range must be >= 0");
    if (hold_s <= 0.0) bad("hold tick must be > 0");
    if (max_hold_s < hold_s) bad("hold budget below one tick");
    if (jobs < 1) bad("jobs must be >= 1");
}

bool detect_lead(double ego_pos_m, double lead_pos_m, const MpcConfig& cfg) {
    const double gap = lead_pos_m - ego_pos_m;
    return gap >= 0.0 && gap <= cfg.horizon_m;
}

ProxyAnchor observe_lead(const LeadTrajectory& lead, double t_s) {
    const double tq = std::clamp(t_s, lead.t_min(), lead.t_max());
    const double t0 = std::clamp(t_s - 1.0, lead.t_min(), lead.t_max());
    ProxyAnchor an;
    an.t_s = t_s;
    an.x_m = lead.pos_at(tq);
    an.v_mps = lead.vel_at(tq);
    const double dt = tq - t0;
    an.a_est_mps2 = dt > 1e-9 ? (an.v_mps - lead.vel_at(t0)) / dt : 0.0;
    an.a_est_mps2 = std::clamp(an.a_est_mps2, -3.0, 3.0);
    return an;
}

ProxyProjection project_proxy(const ProxyAnchor& obs, const Route& route, double span_m) {
    if (span_m <= 0.0) throw ConfigError("proxy: projection span must be > 0");
    const double dt = 0.5;
    ProxyProjection out;
    out.anchor = obs;
    out.traj.source = "synthetic";

    double t = obs.t_s;
    double x = obs.x_m;
    double v = std::max(0.0, obs.v_mps);
    {
        const double lim = effective_speed_limit(route, x, t);
        if (v > lim) {
            if (lim < route.base_limit(x) - 1e-12) out.jam_limited = true;
            v = lim;
        }
    }
    out.traj.samples.push_back({t, x, v});

    const double x_end = obs.x_m + span_m;
    const double t_cap = obs.t_s + 300.0;
    int ticks = 0;
    while (x < x_end - 1e-9 && t < t_cap - 1e-9 && ticks < 4000) {
        ++ticks;
        double v1 = std::max(0.0, v + obs.a_est_mps2 * dt);
        // Clamp against the limit where the tick would land; the landing
        // point moves when the clamp bites, so take a second pass.
        for (int pass = 0; pass < 2; ++pass) {
            const double x_probe = x + 0.5 * (v + v1) * dt;
            const double lim = effective_speed_limit(route, x_probe, t + dt);
            if (v1 > lim) {
                if (lim < route.base_limit(x_probe) - 1e-12) out.jam_limited = true;
                v1 = lim;
            }
        }
        v1 = std::max(0.0, v1);
        // Crawling to a stop: pin it instead of trickling forward for ages.
        if (v1 < 0.05 && obs.a_est_mps2 <= 0.005) v1 = 0.0;
        x += 0.5 * (v + v1) * dt;
        t += dt;
        v = v1;
        out.traj.samples.push_back({t, x, v});
        if (v == 0.0 && obs.a_est_mps2 <= 0.0) break;
    }
    if (v == 0.0 || out.traj.samples.size() < 2) {
        // Stopped (or the span was consumed instantly): hold position far
        // past any lookup the horizon will make.
        out.traj.samples.push_back({t + 600.0, x, 0.0});
    }
    out.traj.validate();
    return out;
}

namespace {

void check_oracle(const MpcConfig& cfg, const TerminalOracle& oracle, const Route& route) {
    auto bad = [](const std::string& what) { throw ConfigError("mpc: " + what); };
    switch (cfg.terminal_cost_source) {
        case TerminalSource::ExactDp: {
            if (!oracle.full_route) bad("exact_dp needs a full-route value function");
            const ValueFunction& vf = *oracle.full_route;
            if (vf.gamma != cfg.gamma) bad("value function gamma differs from the config");
            if (vf.grid.step_offset != 0 || vf.grid.steps != route.step_count() ||
                vf.grid.ds_m != route.ds_m) {
                bad("value function grid does not span the route");
            }
            break;
        }
        case TerminalSource::EnsembleNn:
            if (!oracle.aw) bad("ensemble_nn needs the lead-aware net");
            oracle.aw->validate();
            if (oracle.aw->gamma != cfg.gamma) bad("lead-aware net gamma differs from the config");
            if (oracle.aw->input_count() != kAwFeatureCount) {
                bad("lead-aware net input width is not the lead-aware feature count");
            }
            [[fallthrough]];
        case TerminalSource::AgNn:
            if (!oracle.ag) bad("nn terminal needs the lead-agnostic net");
            oracle.ag->validate();
            if (oracle.ag->gamma != cfg.gamma) bad("lead-agnostic net gamma differs from the config");
            if (oracle.ag->input_count() != kAgFeatureCount) {
                bad("lead-agnostic net input width is not the lead-agnostic feature count");
            }
            if (cfg.terminal_cost_source == TerminalSource::EnsembleNn &&
                oracle.ag->schema_version != oracle.aw->schema_version) {
                bad("ensemble nets disagree on the feature schema");
            }
            break;
    }
}

DpConfig dp_config_for(const MpcConfig& cfg) {
    DpConfig d;
    d.gamma = cfg.gamma;
    d.t_gap_s = cfg.t_gap_s;
    d.terminal = cfg.terminal;
    d.jobs = cfg.jobs;
    return d;
}

}  // namespace

HorizonSolve solve_horizon(const Scenario& sc, const VehicleParams& p, const MpcConfig& cfg,
                           const TerminalOracle& oracle, int s_now, const EgoState& x_now,
                           const std::optional<ProxyAnchor>& obs) {
    cfg.validate();
    const Route& route = sc.route;
    const int N = route.step_count();
    if (route.ds_m != cfg.ds_m) throw ConfigError("mpc: route step size differs from the config");
    if (s_now < 0 || s_now >= N) throw ConfigError("mpc: solve step outside the route");
    check_oracle(cfg, oracle, route);

    const int n_h = std::min(cfg.horizon_steps(), N - s_now);
    const int s_T = s_now + n_h;
    const double x_pos = s_now * route.ds_m;

    HorizonSolve hs;
    hs.diag.step = s_now;
    hs.diag.horizon_steps = n_h;
    hs.diag.lead_in_horizon = obs && detect_lead(x_pos, obs->x_m, cfg);

    Scenario sch = sc;
    sch.ego_v0_mps = x_now.v_mps;
    sch.ego_soc0 = x_now.soc;
    sch.ego_t0_s = x_now.time_s;

    bool use_aw = false;
    std::optional<ProxyProjection> proxy;
    if (cfg.terminal_cost_source == TerminalSource::ExactDp) {
        hs.diag.branch = "exact";
    } else {
        // The sensed lead enters the window only through its projection.
        sch.lead.reset();
        if (obs) {
            proxy = project_proxy(*obs, route, cfg.horizon_m + cfg.proxy_projection_m);
            sch.lead = proxy->traj;
            hs.diag.proxy_jam_limited = proxy->jam_limited;
        }
        use_aw = cfg.terminal_cost_source == TerminalSource::EnsembleNn && hs.diag.lead_in_horizon;
        hs.diag.branch = use_aw ? "aw" : "ag";
    }

    // The corridor is pinned to the episode's starting SoC so every window of
    // one run shares the same SoC axis.
    StateGrid g = build_grid_window(route, sch.lead, p, cfg.grid, s_now, n_h, x_now.v_mps,
                                    x_now.time_s, sc.ego_soc0);
    DpProblem prob(sch, p, std::move(g), dp_config_for(cfg));

    TerminalFn tfn;  // unset: the window reaches the route end, use the route terminal
    if (cfg.terminal_cost_source == TerminalSource::ExactDp) {
        const ValueFunction* vf = oracle.full_route;
        tfn = [vf, s_T](const EgoState& xT) {
            double out;
            return vf->try_value(s_T, xT, out) ? out : kInf;
        };
    } else if (s_T < N) {
        const Route* rp = &route;
        if (use_aw) {
            const TerminalCostNet* net = oracle.aw;
            const double end_pos = s_T * route.ds_m;
            tfn = [net, rp, s_T, end_pos, ptraj = proxy->traj](const EgoState& xT) {
                const double tq = std::clamp(xT.time_s, ptraj.t_min(), ptraj.t_max());
                LeadObservation ob;
                ob.d_lead_m = std::clamp(ptraj.pos_at(tq) - end_pos, 0.0, kLeadSampleWindowM);
                ob.v_lead_mps = ptraj.vel_at(tq);
                return net->forward(extract_features_aw(*rp, xT, s_T, ob).data());
            };
        } else {
            const TerminalCostNet* net = oracle.ag;
            tfn = [net, rp, s_T](const EgoState& xT) {
                return net->forward(extract_features_ag(*rp, xT, s_T).data());
            };
        }
    }

    try {
        const ValueFunction vfh = backward_induction(prob, tfn);
        const std::vector<double>& accels = prob.grid().accel_grid;
        const EgoState x0 = prob.start_state();
        const auto [total, code] = best_control(prob, vfh, 0, x0);
        if (code < 0) throw NoSolutionError("mpc: no admissible first control");
        hs.u = ControlInput{accels[static_cast<std::size_t>(code / 2)], (code & 1) != 0};
        hs.feasible = true;
        hs.diag.j_horizon = total;

        // Replay the plan to its end for the reported terminal value. Only
        // the first control is ever executed, so a replay that dies at a
        // feasibility cliff is recorded, not fatal: the next solve starts
        // from whatever actually happened.
        EgoState w = x0;
        bool reached = true;
        for (int k = 0; k < n_h; ++k) {
            const auto [tot, c] = best_control(prob, vfh, k, w);
            (void)tot;
            if (c < 0) {
                reached = false;
                break;
            }
            w = prob.arc(k, w, accels[static_cast<std::size_t>(c / 2)], (c & 1) != 0).next;
        }
        const double cT =
            reached ? (tfn ? tfn(w) : prob.terminal_cost(w.v_mps, w.soc)) : kInf;
        if (is_finite_cost(cT)) {
            hs.diag.terminal_value = cT;
        } else {
            hs.diag.chain_truncated = true;
        }
    } catch (const NoSolutionError&) {
        hs.feasible = false;
        hs.diag.fallback = true;
        hs.diag.branch = "fallback";
    }
    return hs;
}

ClosedLoopResult run_closed_loop(const Scenario& sc, const VehicleParams& p,
                                 const MpcConfig& cfg, const TerminalOracle& oracle) {
    cfg.validate();
    sc.validate();
    check_oracle(cfg, oracle, sc.route);

    const Route& route = sc.route;
    const int N = route.step_count();
    DpProblem plant(sc, p, build_grid(sc, p, cfg.grid), dp_config_for(cfg));
    const PowerFlows idle = power_split(0.0, 0.0, false, p);

    ClosedLoopResult res;
    EgoState arrival = plant.start_state();
    EgoState x = arrival;
    double held_here = 0.0;
    double hold_stage = 0.0;
    double hold_efc = 0.0;
    int s = 0;
    auto give_up = [&](const std::string& why) {
        res.aborted = true;
        res.abort_step = s;
        res.abort_reason = why;
    };

    while (s < N) {
        std::optional<ProxyAnchor> obs;
        if (sc.lead) {
            const ProxyAnchor an = observe_lead(*sc.lead, x.time_s);
            const double gap = an.x_m - s * route.ds_m;
            if (gap >= 0.0 && gap <= cfg.sensing_m) obs = an;
        }
        HorizonSolve hs = solve_horizon(sc, p, cfg, oracle, s, x, obs);
        const bool dwell = !hs.feasible && x.v_mps == 0.0;
        hs.diag.hold = dwell;
        res.diags.push_back(hs.diag);

        if (dwell) {
            // Nothing admissible from standstill (typically a red phase or a
            // lead bound that time has not yet cleared): idle one tick and
            // ask again.
            if (held_here + cfg.hold_s > cfg.max_hold_s + 1e-9) {
                give_up("standstill recovery exhausted its budget");
                break;
            }
            double icur;
            if (!battery_current_opt(x.soc, idle.elec_demand_W, p, icur)) {
                give_up("auxiliary draw infeasible while holding");
                break;
            }
            x.soc -= cfg.hold_s * icur / p.batt_capacity_C;
            x.time_s += cfg.hold_s;
            held_here += cfg.hold_s;
            hold_stage += stage_cost(idle, cfg.hold_s, cfg.gamma, p);
            hold_efc += idle.equiv_fuel_rate_gps * cfg.hold_s;
            continue;
        }

        ControlInput u;
        ArcOutcome arc;
        if (hs.feasible) {
            u = hs.u;
            arc = plant.arc(s, x, u.accel_mps2, u.engine_on);
            if (!arc.ok) {
                give_up("plant rejected the planned control");
                break;
            }
        } else {
            // Moving with no admissible window: shed speed as hard as the
            // box allows and re-plan from wherever that lands.
            for (const bool eng : {false, true}) {
                u = ControlInput{plant.grid().accel_grid.front(), eng};
                arc = plant.arc(s, x, u.accel_mps2, u.engine_on);
                if (arc.ok) break;
            }
            if (!arc.ok) {
                give_up("plant rejected recovery braking");
                break;
            }
        }

        TrajectoryPoint pt;
        pt.s = s;
        pt.state = arrival;
        pt.u = u;
        pt.a_eff = arc.a_eff;
        pt.hold_s = held_here;
        pt.wait_s = arc.wait_s;
        pt.dt_move_s = arc.dt_move_s;
        pt.flows = arc.flows;
        pt.stage = hold_stage + arc.stage;
        res.traj.points.push_back(pt);
        res.traj.stage_total += pt.stage;
        res.traj.efc_g += hold_efc + arc.flows.equiv_fuel_rate_gps * arc.dt_move_s +
                          idle.equiv_fuel_rate_gps * arc.wait_s;
        res.point_solve.push_back(static_cast<int>(res.diags.size()) - 1);

        x = arc.next;
        arrival = x;
        held_here = 0.0;
        hold_stage = 0.0;
        hold_efc = 0.0;
        ++s;
    }

    res.traj.final_state = x;
    res.traj.time_s = x.time_s - sc.ego_t0_s;
    res.traj.final_soc = x.soc;
    if (!res.aborted) {
        res.traj.terminal = plant.terminal_cost(x.v_mps, x.soc);
    }
    res.traj.cost = res.traj.stage_total + res.traj.terminal;
    res.cost = res.traj.cost;
    return res;
}

ClosedLoopMetrics recompute_metrics(const ClosedLoopResult& res, const VehicleParams& p) {
    const PowerFlows idle = power_split(0.0, 0.0, false, p);
    ClosedLoopMetrics m;
    for (const TrajectoryPoint& pt : res.traj.points) {
        m.efc_g += pt.flows.equiv_fuel_rate_gps * pt.dt_move_s +
                   idle.equiv_fuel_rate_gps * (pt.wait_s + pt.hold_s);
    }
    if (!res.traj.points.empty()) {
        m.time_s = res.traj.final_state.time_s - res.traj.points.front().state.time_s;
    }
    m.final_soc = res.traj.final_state.soc;
    return m;
}

namespace {

const char* kCsvHeader = "s,x_m,t_s,v_mps,soc,accel,engine_on,F_tr_N,P_batt_W,mf_gps,mfeq_gps,cT_value,branch\n";

void append_csv_row(std::ostringstream& os, const TrajectoryPoint& pt, double ds_m, double cT,
                    const std::string& branch) {
    os << pt.s << ',' << fmt_g(pt.s * ds_m) << ',' << fmt_g(pt.state.time_s) << ','
       << fmt_g(pt.state.v_mps) << ',' << fmt_g(pt.state.soc) << ',' << fmt_g(pt.a_eff) << ','
       << (pt.u.engine_on ? 1 : 0) << ',' << fmt_g(pt.flows.tractive_force_N) << ','
       << fmt_g(pt.flows.batt_power_W) << ',' << fmt_g(pt.flows.fuel_rate_gps) << ','
       << fmt_g(pt.flows.equiv_fuel_rate_gps) << ',' << fmt_g(cT) << ',' << branch << '\n';
}

}  // namespace

void save_closed_loop_csv(const ClosedLoopResult& res, const Route& route,
                          const std::string& path) {
    std::ostringstream os;
    os << kCsvHeader;
    for (std::size_t i = 0; i < res.traj.points.size(); ++i) {
        const HorizonDiagnostics& d =
            res.diags[static_cast<std::size_t>(res.point_solve[i])];
        append_csv_row(os, res.traj.points[i], route.ds_m, d.terminal_value, d.branch);
    }
    write_text_file(path, os.str());
}

void save_trajectory_csv(const Trajectory& traj, const Route& route, const std::string& branch,
                         const std::string& path) {
    std::ostringstream os;
    os << kCsvHeader;
    for (const TrajectoryPoint& pt : traj.points) {
        append_csv_row(os, pt, route.ds_m, 0.0, branch);
    }
    write_text_file(path, os.str());
}

void save_diagnostics_jsonl(const ClosedLoopResult& res, const std::string& path) {
    std::ostringstream os;
    for (const HorizonDiagnostics& d : res.diags) {
        const nlohmann::json j{{"step", d.step},
                               {"horizon_steps", d.horizon_steps},
                               {"branch", d.branch},
                               {"lead_in_horizon", d.lead_in_horizon},
                               {"proxy_jam_limited", d.proxy_jam_limited},
                               {"fallback", d.fallback},
                               {"hold", d.hold},
                               {"chain_truncated", d.chain_truncated},
                               {"j_horizon", d.j_horizon},
                               {"terminal_value", d.terminal_value}};
        os << j.dump() << '\n';
    }
    if (res.aborted) {
        const nlohmann::json j{
            {"aborted", true}, {"abort_step", res.abort_step}, {"abort_reason", res.abort_reason}};
        os << j.dump() << '\n';
    }
    write_text_file(path, os.str());
}

}  // namespace ecodrive
