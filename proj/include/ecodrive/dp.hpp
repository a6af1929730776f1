#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ecodrive/grid.hpp"
#include "ecodrive/vehicle.hpp"
#include "ecodrive/world.hpp"

namespace ecodrive {

/// Quadratic pull toward a stopped, charge-healthy end state. Zero when the
/// vehicle ends at rest with SoC at or above the floor.
struct TerminalCost {
    double w_v = 0.5;
    double w_soc = 2e5;
    double soc_floor = 0.25;

    double operator()(double v_mps, double soc) const {
        const double shortfall = soc < soc_floor ? soc_floor - soc : 0.0;
        return w_v * v_mps * v_mps + w_soc * shortfall * shortfall;
    }
};

struct DpConfig {
    double gamma = 0.65;   // fuel-vs-time blend in the stage cost
    double t_gap_s = 2.0;  // minimum headway behind the lead at any node
    TerminalCost terminal;
    int jobs = 1;
};

/// One-step transition outcome. When the step lands on a red light at
/// standstill, the dwell until the next green is folded in: `next.time_s`
/// is the green start, `wait_s` the dwell, and `stage` includes the idle
/// segment. `flows` covers only the moving segment.
struct ArcOutcome {
    bool ok = false;
    EgoState next;
    double stage = 0.0;
    double a_eff = 0.0;  // commanded accel after any exact-stop snap
    double wait_s = 0.0;
    double dt_move_s = 0.0;
    PowerFlows flows;
};

/// Deterministic finite-horizon problem over one scenario. The grid may be a
/// window of the route (step_offset > 0); positions and lights are resolved
/// against route coordinates.
class DpProblem {
public:
    DpProblem(const Scenario& sc, const VehicleParams& p, StateGrid grid, DpConfig cfg);

    const Scenario& scenario() const { return sc_; }
    const VehicleParams& params() const { return params_; }
    const StateGrid& grid() const { return grid_; }
    const DpConfig& config() const { return cfg_; }

    double position(int s) const { return (grid_.step_offset + s) * grid_.ds_m; }
    int light_at(int s) const { return light_at_[static_cast<std::size_t>(s)]; }
    double min_arrival(int s) const { return min_arrival_[static_cast<std::size_t>(s)]; }

    /// Speed under the effective limit, SoC inside the corridor, arrival not
    /// ahead of the lead bound, and green phase when the step is a light.
    bool node_feasible(int s, double v_mps, double soc, double t_s) const;

    ArcOutcome arc(int s, const EgoState& x, double accel_mps2, bool engine_on) const;

    double terminal_cost(double v_mps, double soc) const { return cfg_.terminal(v_mps, soc); }

    EgoState start_state() const;

private:
    Scenario sc_;
    VehicleParams params_;
    StateGrid grid_;
    DpConfig cfg_;
    std::vector<int> light_at_;        // light index per step, -1 when none
    std::vector<double> min_arrival_;  // earliest admissible arrival, -inf when unbound
};

/// Optional override for the last layer; return kInf to mark a terminal
/// state unacceptable. Receives states at route step offset+N.
using TerminalFn = std::function<double(const EgoState&)>;

/// Backward sweep over all layers. Identical output for any job count.
/// Throws NoSolutionError when the start state ends up without finite cost.
ValueFunction backward_induction(const DpProblem& prob, const TerminalFn& terminal = {});

/// Largest |J(s,x) - min_u(stage + J(s+1,x'))| over nodes with finite J,
/// recomputed through the same arc and lookup code as the sweep.
double bellman_residual_max(const DpProblem& prob, const ValueFunction& vf);

struct OracleResult {
    double cost = kInf;
    std::vector<ControlInput> controls;  // one argmin sequence, first-found order
};

/// Exhaustive search over control sequences with successors snapped to grid
/// nodes. Requires nearest-node interpolation so both solvers walk the same
/// finite graph. Throws ConfigError when the sequence count exceeds the
/// budget, NoSolutionError when nothing reaches the end.
OracleResult brute_force_oracle(const DpProblem& prob, double max_sequences = 1e7);

struct TrajectoryPoint {
    int s = 0;
    EgoState state;  // at step s, before the control applies
    ControlInput u;
    double a_eff = 0.0;
    double hold_s = 0.0;  // standstill dwell before moving (plant recovery)
    double wait_s = 0.0;  // dwell at the arrival light until green
    double dt_move_s = 0.0;
    PowerFlows flows;
    double stage = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    EgoState final_state;
    double stage_total = 0.0;
    double terminal = 0.0;
    double cost = 0.0;   // stage_total + terminal
    double efc_g = 0.0;  // equivalent fuel, dwell aux included
    double time_s = 0.0;
    double final_soc = 0.0;
};

/// One re-minimization step of the rollout: the admissible control with the
/// least stage-plus-successor cost from a continuous state. Successors whose
/// whole interpolation cell is feasible are preferred; the renormalized
/// lookup is a fallback. Returns {total, control code}, code -1 when nothing
/// is admissible.
std::pair<double, int> best_control(const DpProblem& prob, const ValueFunction& vf, int s,
                                    const EgoState& x);

/// Forward rollout that re-minimizes over admissible arcs against the stored
/// value function at every step. Throws NoSolutionError when it dead-ends.
Trajectory extract_trajectory(const DpProblem& prob, const ValueFunction& vf);

struct ViolationReport {
    int count = 0;
    std::vector<std::string> notes;  // first few, for diagnostics
};

/// Post-hoc audit of a trajectory against the control box, speed limits,
/// SoC corridor, signal windows, lead gap, and the state recursions.
/// Independent of how the trajectory was produced.
ViolationReport check_trajectory(const DpProblem& prob, const Trajectory& traj);

}  // namespace ecodrive
