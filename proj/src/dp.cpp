#include "ecodrive/dp.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <utility>

namespace ecodrive {

DpProblem::DpProblem(const Scenario& sc, const VehicleParams& p, StateGrid grid, DpConfig cfg)
    : sc_(sc), params_(p), grid_(std::move(grid)), cfg_(cfg) {
    sc_.validate();
    params_.validate();
    if (cfg_.gamma < 0.0 || cfg_.gamma > 1.0) throw ConfigError("dp: gamma outside [0, 1]");
    if (cfg_.t_gap_s < 0.0) throw ConfigError("dp: headway gap must be >= 0");
    if (cfg_.jobs < 1) throw ConfigError("dp: jobs must be >= 1");
    const int N = grid_.steps;
    if (N < 0) throw ConfigError("dp: negative step count");
    if (grid_.step_offset < 0 || grid_.step_offset + N > sc_.route.step_count()) {
        throw ConfigError("dp: grid window extends past the route");
    }
    if (grid_.v_axes.size() != static_cast<std::size_t>(N) + 1 ||
        grid_.t_axes.size() != static_cast<std::size_t>(N) + 1) {
        throw ConfigError("dp: grid axis arrays do not match the step count");
    }
    light_at_.resize(static_cast<std::size_t>(N) + 1);
    min_arrival_.assign(static_cast<std::size_t>(N) + 1, -kInf);
    for (int s = 0; s <= N; ++s) {
        light_at_[static_cast<std::size_t>(s)] =
            sc_.route.light_index_at_step(grid_.step_offset + s);
        if (sc_.lead) {
            const double x = position(s);
            if (x >= sc_.lead->x_min() && x <= sc_.lead->x_max()) {
                min_arrival_[static_cast<std::size_t>(s)] = sc_.lead->time_at(x) + cfg_.t_gap_s;
            }
        }
    }
}

EgoState DpProblem::start_state() const {
    return {sc_.ego_v0_mps, sc_.ego_soc0, sc_.ego_t0_s};
}

bool DpProblem::node_feasible(int s, double v_mps, double soc, double t_s) const {
    if (v_mps > effective_speed_limit(sc_.route, position(s), t_s) + 1e-9) return false;
    if (soc < grid_.soc_axis.lo - 1e-12 || soc > grid_.soc_axis.hi() + 1e-12) return false;
    if (t_s < min_arrival_[static_cast<std::size_t>(s)] - 1e-9) return false;
    const int li = light_at_[static_cast<std::size_t>(s)];
    if (li >= 0 && !signal_phase(sc_.route.lights[static_cast<std::size_t>(li)], t_s).green) {
        return false;
    }
    return true;
}

ArcOutcome DpProblem::arc(int s, const EgoState& x, double accel_mps2, bool engine_on) const {
    ArcOutcome out;
    const double ds = grid_.ds_m;
    const double v = x.v_mps;

    double a = accel_mps2;
    double rad = v * v + 2.0 * ds * a;
    if (rad < 0.0) {
        // Braking stronger than needed to stop within the step: snap to the
        // exact-stop command so the arc still ends on the next node.
        a = -v * v / (2.0 * ds);
        rad = 0.0;
    }
    double vn = std::sqrt(rad);
    // A stop command computed from the state lands on either side of zero by
    // rounding: v*v - 2*ds*(v*v/(2*ds)) leaves ~1e-14, whose square root is
    // ~1e-7. A micrometer-per-second arrival is a stop, not a red-light
    // crossing, and snapping keeps vn*vn within the trajectory audit's
    // squared-domain tolerance.
    if (vn < 1e-6) vn = 0.0;
    if (v == 0.0 && vn == 0.0) return out;  // standstill only happens inside light dwells

    const double f_tr = params_.equiv_mass_kg * a + road_load(v, params_);
    if (f_tr < params_.force_min_N || f_tr > params_.force_max_N) return out;

    const double vbar = 0.5 * (v + vn);
    const double dt = ds / vbar;
    const double t_arr = x.time_s + dt;
    const int sn = s + 1;

    if (t_arr < min_arrival_[static_cast<std::size_t>(sn)] - 1e-9) return out;
    if (vn > effective_speed_limit(sc_.route, position(sn), t_arr) + 1e-9) return out;

    const PowerFlows flows = power_split(vbar, f_tr, engine_on, params_);
    double cur;
    if (!battery_current_opt(x.soc, flows.elec_demand_W, params_, cur)) return out;
    double soc_n = x.soc - ds / (vbar * params_.batt_capacity_C) * cur;
    if (soc_n < grid_.soc_axis.lo - 1e-12 || soc_n > grid_.soc_axis.hi() + 1e-12) return out;

    double stage = stage_cost(flows, dt, cfg_.gamma, params_);
    double t_node = t_arr;
    double wait = 0.0;
    const int li = light_at_[static_cast<std::size_t>(sn)];
    if (li >= 0) {
        const SignalState sig = signal_phase(sc_.route.lights[static_cast<std::size_t>(li)], t_arr);
        if (!sig.green) {
            if (vn > 0.0) return out;  // crossing on red
            wait = sig.t_rg_s;
            t_node = sig.green_start_s;
            const PowerFlows idle = power_split(0.0, 0.0, false, params_);
            double icur;
            if (!battery_current_opt(soc_n, idle.elec_demand_W, params_, icur)) return out;
            soc_n -= wait * icur / params_.batt_capacity_C;
            if (soc_n < grid_.soc_axis.lo - 1e-12) return out;
            stage += stage_cost(idle, wait, cfg_.gamma, params_);
        }
    }

    out.ok = true;
    out.next = EgoState{vn, soc_n, t_node};
    out.stage = stage;
    out.a_eff = a;
    out.wait_s = wait;
    out.dt_move_s = dt;
    out.flows = flows;
    return out;
}

namespace {

// Shared by the sweep, the residual check, and the rollout so all three see
// bit-identical minimization. Control order: accel index outer, engine flag
// inner; strict improvement keeps the first argmin.
std::pair<double, int> solve_node(const DpProblem& prob, const ValueFunction& vf, int s,
                                  const EgoState& x, bool strict = false) {
    double best = kInf;
    int best_code = -1;
    const std::vector<double>& ag = vf.grid.accel_grid;
    for (std::size_t ia = 0; ia < ag.size(); ++ia) {
        for (int eng = 0; eng < 2; ++eng) {
            const ArcOutcome arc = prob.arc(s, x, ag[ia], eng != 0);
            if (!arc.ok) continue;
            double jn;
            if (!vf.try_value(s + 1, arc.next, jn, strict)) continue;
            const double total = arc.stage + jn;
            if (total < best) {
                best = total;
                best_code = static_cast<int>(ia) * 2 + eng;
            }
        }
    }
    return {best, best_code};
}

}  // namespace

ValueFunction backward_induction(const DpProblem& prob, const TerminalFn& terminal) {
    const StateGrid& g = prob.grid();
    const int N = g.steps;
    ValueFunction vf;
    vf.grid = g;
    vf.gamma = prob.config().gamma;
    vf.scenario_hash = fnv1a(scenario_text(prob.scenario()));
    vf.J.resize(static_cast<std::size_t>(N) + 1);
    vf.policy.resize(static_cast<std::size_t>(N) + 1);
    for (int s = 0; s <= N; ++s) {
        vf.J[static_cast<std::size_t>(s)].assign(g.layer_size(s), kInf);
        vf.policy[static_cast<std::size_t>(s)].assign(g.layer_size(s), 0xFF);
    }

    {
        const Axis& va = g.v_axes[static_cast<std::size_t>(N)];
        const Axis& ta = g.t_axes[static_cast<std::size_t>(N)];
        auto& layer = vf.J[static_cast<std::size_t>(N)];
        for (int iv = 0; iv < va.count; ++iv) {
            const double v = va.at(iv);
            for (int ixi = 0; ixi < g.soc_axis.count; ++ixi) {
                const double soc = g.soc_axis.at(ixi);
                for (int it = 0; it < ta.count; ++it) {
                    const double t = ta.at(it);
                    if (!prob.node_feasible(N, v, soc, t)) continue;
                    const double c = terminal ? terminal(EgoState{v, soc, t})
                                              : prob.terminal_cost(v, soc);
                    if (is_finite_cost(c)) layer[g.node(N, iv, ixi, it)] = c;
                }
            }
        }
    }

    for (int s = N - 1; s >= 0; --s) {
        const Axis& va = g.v_axes[static_cast<std::size_t>(s)];
        const Axis& ta = g.t_axes[static_cast<std::size_t>(s)];
        auto& layer = vf.J[static_cast<std::size_t>(s)];
        auto& pol = vf.policy[static_cast<std::size_t>(s)];
        const std::size_t columns =
            static_cast<std::size_t>(va.count) * static_cast<std::size_t>(g.soc_axis.count);
        parallel_for(columns, prob.config().jobs, [&](std::size_t col) {
            const int iv = static_cast<int>(col / static_cast<std::size_t>(g.soc_axis.count));
            const int ixi = static_cast<int>(col % static_cast<std::size_t>(g.soc_axis.count));
            EgoState x;
            x.v_mps = va.at(iv);
            x.soc = g.soc_axis.at(ixi);
            for (int it = 0; it < ta.count; ++it) {
                x.time_s = ta.at(it);
                if (!prob.node_feasible(s, x.v_mps, x.soc, x.time_s)) continue;
                const auto [best, code] = solve_node(prob, vf, s, x);
                if (code >= 0) {
                    const std::size_t idx = g.node(s, iv, ixi, it);
                    layer[idx] = best;
                    pol[idx] = static_cast<std::uint8_t>(code);
                }
            }
        });
    }

    const EgoState x0 = prob.start_state();
    double j0;
    if (!prob.node_feasible(0, x0.v_mps, x0.soc, x0.time_s) || !vf.try_value(0, x0, j0)) {
        throw NoSolutionError("dp: start state has no finite cost-to-go");
    }
    return vf;
}

double bellman_residual_max(const DpProblem& prob, const ValueFunction& vf) {
    const StateGrid& g = vf.grid;
    double worst = 0.0;
    for (int s = 0; s < g.steps; ++s) {
        const Axis& va = g.v_axes[static_cast<std::size_t>(s)];
        const Axis& ta = g.t_axes[static_cast<std::size_t>(s)];
        const auto& layer = vf.J[static_cast<std::size_t>(s)];
        for (int iv = 0; iv < va.count; ++iv) {
            for (int ixi = 0; ixi < g.soc_axis.count; ++ixi) {
                for (int it = 0; it < ta.count; ++it) {
                    const double j = layer[g.node(s, iv, ixi, it)];
                    if (!is_finite_cost(j)) continue;
                    const EgoState x{va.at(iv), g.soc_axis.at(ixi), ta.at(it)};
                    const auto [best, code] = solve_node(prob, vf, s, x);
                    (void)code;
                    worst = std::max(worst, std::abs(j - best));
                }
            }
        }
    }
    return worst;
}

namespace {

// Snap a continuous state to the nearest node of layer s; false off the hull.
bool snap_to_layer(const StateGrid& g, int s, const EgoState& x, EgoState& out) {
    const Axis& va = g.v_axes[static_cast<std::size_t>(s)];
    const Axis& ta = g.t_axes[static_cast<std::size_t>(s)];
    if (!va.contains(x.v_mps) || !g.soc_axis.contains(x.soc) || !ta.contains(x.time_s)) {
        return false;
    }
    out = EgoState{va.at(va.nearest(x.v_mps)), g.soc_axis.at(g.soc_axis.nearest(x.soc)),
                   ta.at(ta.nearest(x.time_s))};
    return true;
}

// Cost-to-go and first-found argmin code from a grid node; pure recursion,
// no memoization, so every visited value is recomputed the same way.
std::pair<double, int> oracle_dfs(const DpProblem& prob, int s, const EgoState& x) {
    const StateGrid& g = prob.grid();
    if (!prob.node_feasible(s, x.v_mps, x.soc, x.time_s)) return {kInf, -1};
    if (s == g.steps) return {prob.terminal_cost(x.v_mps, x.soc), -1};
    double best = kInf;
    int best_code = -1;
    for (std::size_t ia = 0; ia < g.accel_grid.size(); ++ia) {
        for (int eng = 0; eng < 2; ++eng) {
            const ArcOutcome arc = prob.arc(s, x, g.accel_grid[ia], eng != 0);
            if (!arc.ok) continue;
            EgoState node;
            if (!snap_to_layer(g, s + 1, arc.next, node)) continue;
            const double sub = oracle_dfs(prob, s + 1, node).first;
            if (!is_finite_cost(sub)) continue;
            const double total = arc.stage + sub;
            if (total < best) {
                best = total;
                best_code = static_cast<int>(ia) * 2 + eng;
            }
        }
    }
    return {best, best_code};
}

}  // namespace

OracleResult brute_force_oracle(const DpProblem& prob, double max_sequences) {
    const StateGrid& g = prob.grid();
    if (g.interp != InterpMode::Nearest) {
        throw ConfigError("oracle: requires nearest-node interpolation");
    }
    double sequences = 1.0;
    for (int s = 0; s < g.steps; ++s) {
        sequences *= 2.0 * static_cast<double>(g.accel_grid.size());
        if (sequences > max_sequences) throw ConfigError("oracle: sequence budget exceeded");
    }

    EgoState x;
    if (!snap_to_layer(g, 0, prob.start_state(), x)) {
        throw NoSolutionError("oracle: start state off the grid");
    }
    OracleResult res;
    auto [cost, code] = oracle_dfs(prob, 0, x);
    if (!is_finite_cost(cost)) throw NoSolutionError("oracle: no feasible control sequence");
    res.cost = cost;
    for (int s = 0; s < g.steps; ++s) {
        const ControlInput u{g.accel_grid[static_cast<std::size_t>(code / 2)], (code & 1) != 0};
        res.controls.push_back(u);
        const ArcOutcome arc = prob.arc(s, x, u.accel_mps2, u.engine_on);
        EgoState node;
        if (!arc.ok || !snap_to_layer(g, s + 1, arc.next, node)) {
            throw NoSolutionError("oracle: argmin replay diverged");
        }
        x = node;
        if (s + 1 < g.steps) code = oracle_dfs(prob, s + 1, x).second;
    }
    return res;
}

namespace {

// True when shedding speed as hard as the box allows reaches a standstill or
// the last step from (s, x). A state that fails this is beyond rescue: some
// bound ahead is violated no matter what, even though each lookup cell along
// the way can average finite corners. Hard braking maximizes every arrival
// time and minimizes every arrival speed, so if this chain breaks a bound,
// every other control chain breaks one sooner.
bool brakeable(const DpProblem& prob, int s, EgoState x) {
    const double a_hard = prob.grid().accel_grid.front();
    while (s < prob.grid().steps && x.v_mps > 0.0) {
        ArcOutcome arc = prob.arc(s, x, a_hard, false);
        if (!arc.ok) arc = prob.arc(s, x, a_hard, true);
        if (!arc.ok) return false;
        x = arc.next;
        ++s;
    }
    return true;
}

}  // namespace

std::pair<double, int> best_control(const DpProblem& prob, const ValueFunction& vf, int s,
                                    const EgoState& x) {
    // Prefer successors whose whole interpolation cell is feasible; the
    // renormalized fallback can sit right next to a timing cliff. Either way
    // the successor must stay brakeable, which screens out controls whose
    // doom hides between grid corners.
    const std::vector<double>& ag = vf.grid.accel_grid;
    double best[2] = {kInf, kInf};
    int code[2] = {-1, -1};
    for (std::size_t ia = 0; ia < ag.size(); ++ia) {
        for (int eng = 0; eng < 2; ++eng) {
            const ArcOutcome arc = prob.arc(s, x, ag[ia], eng != 0);
            if (!arc.ok) continue;
            double jn;
            const bool whole_cell = vf.try_value(s + 1, arc.next, jn, /*strict=*/true);
            if (!whole_cell && !vf.try_value(s + 1, arc.next, jn)) continue;
            const int pass = whole_cell ? 0 : 1;
            const double total = arc.stage + jn;
            if (total < best[pass] && brakeable(prob, s + 1, arc.next)) {
                best[pass] = total;
                code[pass] = static_cast<int>(ia) * 2 + eng;
            }
        }
    }
    return code[0] >= 0 ? std::pair{best[0], code[0]} : std::pair{best[1], code[1]};
}

Trajectory extract_trajectory(const DpProblem& prob, const ValueFunction& vf) {
    const StateGrid& g = vf.grid;
    Trajectory traj;
    EgoState x = prob.start_state();
    double j0;
    if (!prob.node_feasible(0, x.v_mps, x.soc, x.time_s) || !vf.try_value(0, x, j0)) {
        throw NoSolutionError("rollout: start state infeasible or off the grid");
    }
    const PowerFlows idle = power_split(0.0, 0.0, false, prob.params());
    for (int s = 0; s < g.steps; ++s) {
        const auto [best, code] = best_control(prob, vf, s, x);
        (void)best;
        if (code < 0) {
            throw NoSolutionError("rollout: dead end at step " + std::to_string(s));
        }
        const ControlInput u{g.accel_grid[static_cast<std::size_t>(code / 2)], (code & 1) != 0};
        const ArcOutcome arc = prob.arc(s, x, u.accel_mps2, u.engine_on);
        TrajectoryPoint pt;
        pt.s = s;
        pt.state = x;
        pt.u = u;
        pt.a_eff = arc.a_eff;
        pt.wait_s = arc.wait_s;
        pt.dt_move_s = arc.dt_move_s;
        pt.flows = arc.flows;
        pt.stage = arc.stage;
        traj.points.push_back(pt);
        traj.stage_total += arc.stage;
        traj.efc_g += arc.flows.equiv_fuel_rate_gps * arc.dt_move_s +
                      idle.equiv_fuel_rate_gps * arc.wait_s;
        x = arc.next;
    }
    traj.final_state = x;
    traj.terminal = prob.terminal_cost(x.v_mps, x.soc);
    traj.cost = traj.stage_total + traj.terminal;
    traj.time_s = x.time_s - prob.scenario().ego_t0_s;
    traj.final_soc = x.soc;
    return traj;
}

ViolationReport check_trajectory(const DpProblem& prob, const Trajectory& traj) {
    ViolationReport rep;
    auto flag = [&rep](const std::string& what) {
        ++rep.count;
        if (rep.notes.size() < 8) rep.notes.push_back(what);
    };
    const VehicleParams& p = prob.params();
    const Route& r = prob.scenario().route;
    const StateGrid& g = prob.grid();
    const double ds = g.ds_m;
    const int n = static_cast<int>(traj.points.size());
    for (int i = 0; i < n; ++i) {
        const TrajectoryPoint& pt = traj.points[i];
        const EgoState& x = pt.state;
        const EgoState& nx = (i + 1 < n) ? traj.points[i + 1].state : traj.final_state;
        const std::string at = "step " + std::to_string(pt.s);

        if (pt.a_eff < p.accel_min_mps2 - 1e-9 || pt.a_eff > p.accel_max_mps2 + 1e-9) {
            flag(at + ": accel outside the box");
        }
        const double f_tr = p.equiv_mass_kg * pt.a_eff + road_load(x.v_mps, p);
        if (f_tr < p.force_min_N - 1e-6 || f_tr > p.force_max_N + 1e-6) {
            flag(at + ": force outside the box");
        }
        if (pt.hold_s < 0.0 || (pt.hold_s > 0.0 && x.v_mps != 0.0)) {
            flag(at + ": hold while moving");
        }

        const double t_dep = x.time_s + pt.hold_s;
        if (x.v_mps > effective_speed_limit(r, prob.position(pt.s), x.time_s) + 1e-9) {
            flag(at + ": speed above the limit");
        }
        if (x.v_mps > 0.0 && x.v_mps < r.min_speed_mps - 1e-9) {
            flag(at + ": below the minimum speed");
        }
        if (x.soc < g.soc_axis.lo - 1e-9 || x.soc > g.soc_axis.hi() + 1e-9) {
            flag(at + ": SoC outside the corridor");
        }

        // compare in the squared domain: the exact-stop snap leaves a
        // rounding-level radicand that sqrt would inflate past any sane tol
        const double rad = x.v_mps * x.v_mps + 2.0 * ds * pt.a_eff;
        if (std::abs(std::max(0.0, rad) - nx.v_mps * nx.v_mps) > 1e-9) {
            flag(at + ": velocity recursion broken");
        }
        const double vbar = 0.5 * (x.v_mps + nx.v_mps);
        if (vbar <= 0.0) {
            flag(at + ": zero average speed");
            continue;
        }
        if (std::abs(pt.dt_move_s - ds / vbar) > 1e-9) flag(at + ": time recursion broken");

        const double t_arr = t_dep + pt.dt_move_s;
        if (t_arr < prob.min_arrival(pt.s + 1) - 1e-9) flag(at + ": lead gap violated");
        const int li = prob.light_at(pt.s + 1);
        if (li >= 0) {
            const SignalState sig = signal_phase(r.lights[static_cast<std::size_t>(li)], t_arr);
            if (sig.green) {
                if (pt.wait_s != 0.0) flag(at + ": dwell on green");
                if (std::abs(nx.time_s - t_arr) > 1e-9) flag(at + ": arrival time mismatch");
            } else {
                if (nx.v_mps > 0.0) flag(at + ": crossing on red");
                if (std::abs(nx.time_s - sig.green_start_s) > 1e-9) {
                    flag(at + ": dwell does not end at green");
                }
            }
            if (!signal_phase(r.lights[static_cast<std::size_t>(li)], nx.time_s).green) {
                flag(at + ": node time in a red phase");
            }
        } else {
            if (pt.wait_s != 0.0) flag(at + ": dwell away from a light");
            if (std::abs(nx.time_s - t_arr) > 1e-9) flag(at + ": arrival time mismatch");
        }
        if (nx.v_mps > effective_speed_limit(r, prob.position(pt.s + 1), t_arr) + 1e-9) {
            flag(at + ": arrival speed above the limit");
        }
        if (nx.soc < g.soc_axis.lo - 1e-9 || nx.soc > g.soc_axis.hi() + 1e-9) {
            flag(at + ": arrival SoC outside the corridor");
        }
    }
    return rep;
}

}  // namespace ecodrive
