#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ecodrive/common.hpp"
#include "ecodrive/vehicle.hpp"
#include "ecodrive/world.hpp"

namespace ecodrive {

// Uniform axis lo + i*step, i in [0, count).
struct Axis {
    double lo = 0.0;
    double step = 1.0;
    int count = 1;

    double at(int i) const { return lo + step * i; }
    double hi() const { return at(count - 1); }
    bool contains(double x) const {
        const double tol = 1e-9 * std::max(1.0, step);
        return x >= lo - tol && x <= hi() + tol;
    }
    int nearest(double x) const;
    // Lower bracket index and fractional weight for linear interpolation;
    // valid only when contains(x). Degenerate single-node axes give {0, 0}.
    struct Loc {
        int i0;
        double w;
    };
    Loc locate(double x) const;
};

enum class InterpMode { Multilinear, Nearest };

// Discretization knobs. The SoC corridor is centered on the scenario's start
// SoC; the time band at step s spans the max-acceleration envelope up to a
// slow-pace deadline plus one full red per passed light.
struct GridSpec {
    double dv_mps = 1.0;
    double dsoc = 0.005;
    double dt_s = 1.0;
    double soc_below = 0.06;  // corridor extent under / over the start SoC
    double soc_above = 0.04;
    double slow_avg_mps = 9.0;
    double time_slack_s = 30.0;
    InterpMode interp = InterpMode::Multilinear;
    std::vector<double> accel_grid = {-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
};

// Per-distance-step axes over (v, soc, t). soc is shared; v and t vary by
// step so the arrays track the reachable band instead of the full box.
struct StateGrid {
    double ds_m = 10.0;
    int steps = 0;       // N; layers run 0..N
    int step_offset = 0; // layer 0 sits at this route step (horizon windows)
    std::vector<Axis> v_axes;
    Axis soc_axis;
    std::vector<Axis> t_axes;
    // Earliest reachable clock per layer, before the time axis rounds it
    // down onto its phase. Nodes below this exist only to carry
    // interpolation weight; no dynamically feasible state lives there.
    std::vector<double> t_earliest_s;
    InterpMode interp = InterpMode::Multilinear;
    std::vector<double> accel_grid;

    std::size_t layer_size(int s) const {
        return static_cast<std::size_t>(v_axes[s].count) * soc_axis.count * t_axes[s].count;
    }
    std::size_t node(int s, int iv, int ixi, int it) const {
        return (static_cast<std::size_t>(iv) * soc_axis.count + ixi) * t_axes[s].count + it;
    }
    std::size_t total_nodes() const;
};

StateGrid build_grid(const Scenario& sc, const VehicleParams& p, const GridSpec& spec);

// Axes for an n_steps-long window starting at route step s0, seeded from the
// given start speed and clock. soc_anchor pins the corridor; rolling solves
// pass the episode's starting SoC so every window shares one SoC axis.
StateGrid build_grid_window(const Route& route, const std::optional<LeadTrajectory>& lead,
                            const VehicleParams& p, const GridSpec& spec, int s0, int n_steps,
                            double v_start, double t_start, double soc_anchor);

// Cost-to-go layers over a StateGrid. Infeasible nodes hold the kInf
// sentinel; policy stores the argmin control code (accel index * 2 +
// engine flag) or 0xFF where none exists.
struct ValueFunction {
    StateGrid grid;
    double gamma = 0.65;
    std::uint64_t scenario_hash = 0;
    std::vector<std::vector<double>> J;
    std::vector<std::vector<std::uint8_t>> policy;

    // Interpolated cost-to-go; respects the grid's interpolation mode.
    // Infinite-valued neighbors are dropped with weight renormalization.
    // In strict mode any infeasible carrying corner fails the lookup
    // instead; rollouts use it to stay clear of feasibility cliffs.
    bool try_value(int s, double v, double soc, double t, double& out,
                   bool strict = false) const;
    bool try_value(int s, const EgoState& x, double& out, bool strict = false) const {
        return try_value(s, x.v_mps, x.soc, x.time_s, out, strict);
    }
    // Throwing variant: ExtrapolationError off the hull, NoSolutionError when
    // every contributing neighbor is infeasible.
    double value(int s, const EgoState& x) const;
};

void save_value_function(const ValueFunction& vf, const std::string& path);
ValueFunction load_value_function(const std::string& path);

// Inspection dump `s,v,soc,t,J`, thinned by stride along each axis.
void dump_value_csv(const ValueFunction& vf, const std::string& path, int stride = 1);

}  // namespace ecodrive
