#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ecodrive/dp.hpp"
#include "ecodrive/net.hpp"

namespace ecodrive {

enum class TerminalSource { ExactDp, AgNn, EnsembleNn };

std::string to_string(TerminalSource src);  // exact_dp | ag_nn | ensemble_nn
TerminalSource terminal_source_from(const std::string& name);

struct MpcConfig {
    double ds_m = 10.0;
    double horizon_m = 200.0;
    double gamma = 0.65;
    TerminalSource terminal_cost_source = TerminalSource::ExactDp;
    double t_gap_s = 2.0;
    double proxy_projection_m = 200.0;  // lead projection reach past the horizon
    double sensing_m = 200.0;           // lead observable within this gap
    double hold_s = 1.0;                // standstill recovery tick
    double max_hold_s = 300.0;          // give up after dwelling this long in one spot
    GridSpec grid;                      // horizon axes
    TerminalCost terminal;              // route-end cost where the window is not truncated
    int jobs = 1;

    int horizon_steps() const;
    void validate() const;
};

// A lead counts as in the planning horizon from dead ahead out to horizon_m,
// boundary included.
bool detect_lead(double ego_pos_m, double lead_pos_m, const MpcConfig& cfg);

struct ProxyAnchor {
    double t_s = 0.0;
    double x_m = 0.0;
    double v_mps = 0.0;
    double a_est_mps2 = 0.0;
};

// Anchor measured off a lead trajectory at time t: speed at t and a backward
// difference over one second for the acceleration estimate, clamped to what
// road vehicles do.
ProxyAnchor observe_lead(const LeadTrajectory& lead, double t_s);

struct ProxyProjection {
    ProxyAnchor anchor;
    LeadTrajectory traj;
    bool jam_limited = false;  // a jam's limit capped the projected speed somewhere
};

// Constant-acceleration projection of the observed lead, speed clamped into
// [0, effective limit] pointwise, carried span_m down the road (or until the
// lead stops, which pins it in place).
ProxyProjection project_proxy(const ProxyAnchor& obs, const Route& route, double span_m);

// Terminal-cost providers; only the ones the configured source needs must be
// set. All set providers must match the config's gamma exactly.
struct TerminalOracle {
    const ValueFunction* full_route = nullptr;  // exact_dp
    const TerminalCostNet* ag = nullptr;        // ag_nn and ensemble_nn
    const TerminalCostNet* aw = nullptr;        // ensemble_nn
};

struct HorizonDiagnostics {
    int step = 0;  // route step the solve started from
    int horizon_steps = 0;
    std::string branch;       // exact | ag | aw | fallback
    bool lead_in_horizon = false;
    bool proxy_jam_limited = false;
    bool fallback = false;    // horizon infeasible, recovery control applied
    bool hold = false;        // the recovery was a standstill dwell
    bool chain_truncated = false;  // diagnostic replay died before the horizon end
    double j_horizon = kInf;  // planned total from the solve state
    double terminal_value = 0.0;  // terminal cost where the replayed chain ends
};

struct HorizonSolve {
    ControlInput u;
    bool feasible = false;
    HorizonDiagnostics diag;
};

// One receding-horizon optimization from state x_now at route step s_now.
// obs carries the sensed lead when one is in range; exact_dp ignores it and
// plans against the scenario's recorded lead.
HorizonSolve solve_horizon(const Scenario& sc, const VehicleParams& p, const MpcConfig& cfg,
                           const TerminalOracle& oracle, int s_now, const EgoState& x_now,
                           const std::optional<ProxyAnchor>& obs);

struct ClosedLoopResult {
    Trajectory traj;
    std::vector<HorizonDiagnostics> diags;  // one per solve; holds re-solve
    std::vector<int> point_solve;           // index into diags per trajectory point
    double cost = 0.0;                      // stage total + route terminal
    bool aborted = false;
    int abort_step = -1;
    std::string abort_reason;
};

// Step the plant down the whole route, re-solving the horizon at every node.
// The plant transition enforces the recorded lead and all constraints; a
// control it rejects aborts the run rather than bending the model.
ClosedLoopResult run_closed_loop(const Scenario& sc, const VehicleParams& p,
                                 const MpcConfig& cfg, const TerminalOracle& oracle);

struct ClosedLoopMetrics {
    double efc_g = 0.0;
    double time_s = 0.0;
    double final_soc = 0.0;
};

// Metrics recomputed from the per-step records alone, for consistency audits
// against the totals carried in the trajectory.
ClosedLoopMetrics recompute_metrics(const ClosedLoopResult& res, const VehicleParams& p);

void save_closed_loop_csv(const ClosedLoopResult& res, const Route& route,
                          const std::string& path);
// Same schema for an open-loop trajectory: terminal-cost column zero, fixed
// branch label.
void save_trajectory_csv(const Trajectory& traj, const Route& route, const std::string& branch,
                         const std::string& path);
void save_diagnostics_jsonl(const ClosedLoopResult& res, const std::string& path);

}  // namespace ecodrive
