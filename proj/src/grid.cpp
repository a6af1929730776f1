#include "ecodrive/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ecodrive {

int Axis::nearest(double x) const {
    int i = static_cast<int>(std::llround((x - lo) / step));
    if (i < 0) i = 0;
    if (i >= count) i = count - 1;
    return i;
}

Axis::Loc Axis::locate(double x) const {
    if (count <= 1) return {0, 0.0};
    const double u = (x - lo) / step;
    int i = static_cast<int>(std::floor(u));
    if (i < 0) i = 0;
    if (i > count - 2) i = count - 2;
    double w = u - i;
    if (w < 0.0) w = 0.0;
    if (w > 1.0) w = 1.0;
    return {i, w};
}

std::size_t StateGrid::total_nodes() const {
    std::size_t n = 0;
    for (int s = 0; s <= steps; ++s) n += layer_size(s);
    return n;
}

StateGrid build_grid_window(const Route& r, const std::optional<LeadTrajectory>& lead,
                            const VehicleParams& p, const GridSpec& spec, int s0, int n_steps,
                            double v_start, double t_start, double soc_anchor) {
    r.validate();
    p.validate();
    auto bad = [](const std::string& what) { throw ConfigError("grid spec: " + what); };
    if (spec.dv_mps <= 0 || spec.dsoc <= 0 || spec.dt_s <= 0) bad("step sizes must be > 0");
    if (spec.slow_avg_mps <= 0) bad("slow_avg must be > 0");
    if (spec.accel_grid.empty()) bad("empty acceleration grid");
    if (spec.accel_grid.size() > 127) bad("acceleration grid too large for policy codes");
    for (std::size_t i = 0; i < spec.accel_grid.size(); ++i) {
        const double a = spec.accel_grid[i];
        if (a < p.accel_min_mps2 - 1e-12 || a > p.accel_max_mps2 + 1e-12) {
            bad("acceleration " + fmt_g(a) + " outside the vehicle box");
        }
        if (i && spec.accel_grid[i] <= spec.accel_grid[i - 1]) bad("acceleration grid not increasing");
    }
    const double a_max = spec.accel_grid.back();
    if (a_max < 0) bad("acceleration grid is all braking");
    if (a_max == 0 && v_start <= 0) bad("start at rest needs a positive acceleration");
    if (s0 < 0 || n_steps < 0 || s0 + n_steps > r.step_count()) bad("window outside the route");
    if (soc_anchor < 0.0 || soc_anchor > 1.0) bad("soc anchor outside [0, 1]");
    if (v_start < 0.0) bad("negative start speed");

    const int N = n_steps;
    const double x0 = s0 * r.ds_m;
    if (v_start > r.base_limit(x0) + 1e-9) bad("start speed above the limit at the window origin");

    StateGrid g;
    g.ds_m = r.ds_m;
    g.steps = N;
    g.step_offset = s0;
    g.interp = spec.interp;
    g.accel_grid = spec.accel_grid;

    // SoC corridor snapped so the anchor SoC sits exactly on a node. Windows
    // of a rolling solve pass the episode's starting SoC here so every window
    // shares one axis.
    {
        const double lo = std::max(0.0, soc_anchor - spec.soc_below);
        const double hi = std::min(1.0, soc_anchor + spec.soc_above);
        const int below = static_cast<int>(std::floor((soc_anchor - lo) / spec.dsoc + 1e-9));
        const int above = static_cast<int>(std::floor((hi - soc_anchor) / spec.dsoc + 1e-9));
        g.soc_axis = {soc_anchor - below * spec.dsoc, spec.dsoc, below + above + 1};
    }

    // Earliest-arrival envelope under maximum acceleration and base limits.
    // Lights and jams only delay, so this lower-bounds every feasible arrival
    // and anchors the time axes. t_bound tightens it with the other pure-delay
    // constraints (reds crossed on the way, the lead's own passage) to mark
    // where reachability truly starts; nodes below that are phase padding.
    // Red waits advance only the departure feeding downstream layers, so
    // red-time nodes at the light layer itself keep their infeasible mark.
    std::vector<double> t_early(N + 1), t_bound(N + 1);
    {
        double v = std::min(v_start, r.base_limit(x0));
        t_early[0] = t_start;
        t_bound[0] = t_start;
        for (int s = 0; s < N; ++s) {
            const double cap = r.base_limit(x0 + (s + 1) * g.ds_m);
            const double vn = std::min(cap, std::sqrt(v * v + 2.0 * g.ds_m * a_max));
            const double dt = g.ds_m / (0.5 * (v + vn));
            t_early[s + 1] = t_early[s] + dt;
            double dep = t_bound[s];
            const int li = r.light_index_at_step(s0 + s);
            if (li >= 0) {
                const SignalState sig = signal_phase(r.lights[static_cast<std::size_t>(li)], dep);
                if (!sig.green) dep = sig.green_start_s;
            }
            double tb = dep + dt;
            const double xn = x0 + (s + 1) * g.ds_m;
            if (lead && xn >= lead->x_min() && xn <= lead->x_max()) {
                tb = std::max(tb, lead->time_at(xn));
            }
            t_bound[s + 1] = tb;
            v = vn;
        }
    }

    g.v_axes.resize(N + 1);
    g.t_axes.resize(N + 1);
    double red_budget = 0.0;
    std::size_t light_cursor = 0;
    // Lights behind the window already spent their delay; it is baked into
    // t_start. One sitting exactly at the origin still counts, since its red
    // phase can hold back every arrival downstream.
    while (light_cursor < r.lights.size() &&
           std::llround(r.lights[light_cursor].position_m / g.ds_m) < s0) {
        ++light_cursor;
    }
    for (int s = 0; s <= N; ++s) {
        const double x = x0 + s * g.ds_m;
        while (light_cursor < r.lights.size() &&
               std::llround(r.lights[light_cursor].position_m / g.ds_m) <= s0 + s) {
            red_budget += r.lights[light_cursor].cycle_s - r.lights[light_cursor].green_s;
            ++light_cursor;
        }
        const double t_lo = t_start + std::floor((t_early[s] - t_start) / spec.dt_s) * spec.dt_s;
        double t_hi = t_start + (x - x0) / spec.slow_avg_mps + red_budget + spec.time_slack_s;
        if (lead && x >= lead->x_min() && x <= lead->x_max()) {
            // A slow lead pushes arrivals later than the slow-pace deadline;
            // keep the band wide enough that trailing it stays on the grid.
            t_hi = std::max(t_hi, lead->time_at(x) + spec.time_slack_s);
        }
        const int t_count =
            1 + std::max(0, static_cast<int>(std::ceil((t_hi - t_lo) / spec.dt_s - 1e-9)));
        g.t_axes[s] = {t_lo, spec.dt_s, t_count};

        double vub = s == 0 ? v_start : 0.0;
        for (int it = 0; it < t_count; ++it) {
            vub = std::max(vub, effective_speed_limit(r, x, g.t_axes[s].at(it)));
        }
        const int v_count = 1 + static_cast<int>(std::floor(vub / spec.dv_mps + 1e-9));
        g.v_axes[s] = {0.0, spec.dv_mps, v_count};
    }
    g.t_earliest_s = std::move(t_bound);
    return g;
}

StateGrid build_grid(const Scenario& sc, const VehicleParams& p, const GridSpec& spec) {
    sc.validate();
    return build_grid_window(sc.route, sc.lead, p, spec, 0, sc.route.step_count(),
                             sc.ego_v0_mps, sc.ego_t0_s, sc.ego_soc0);
}

namespace {

struct AxisBracket {
    int i0, i1;
    double w1;
};

inline AxisBracket bracket(const Axis& ax, double x) {
    const Axis::Loc l = ax.locate(x);
    const int i1 = (l.i0 + 1 < ax.count) ? l.i0 + 1 : l.i0;
    return {l.i0, i1, l.w};
}

}  // namespace

bool ValueFunction::try_value(int s, double v, double soc, double t, double& out,
                              bool strict) const {
    const Axis& va = grid.v_axes[s];
    const Axis& xa = grid.soc_axis;
    const Axis& ta = grid.t_axes[s];
    if (!va.contains(v) || !xa.contains(soc) || !ta.contains(t)) return false;
    const std::vector<double>& layer = J[s];
    if (grid.interp == InterpMode::Nearest) {
        const double val = layer[grid.node(s, va.nearest(v), xa.nearest(soc), ta.nearest(t))];
        if (!is_finite_cost(val)) return false;
        out = val;
        return true;
    }
    const AxisBracket bv = bracket(va, v);
    const AxisBracket bx = bracket(xa, soc);
    const AxisBracket bt = bracket(ta, t);
    const int iv[2] = {bv.i0, bv.i1};
    const int ix[2] = {bx.i0, bx.i1};
    const int it[2] = {bt.i0, bt.i1};
    const double wv[2] = {1.0 - bv.w1, bv.w1};
    const double wx[2] = {1.0 - bx.w1, bx.w1};
    const double wt[2] = {1.0 - bt.w1, bt.w1};
    // Time nodes under the reachability envelope are phase padding from the
    // axis rounding; they often hold kInf because their own forward arcs
    // land before the next layer's axis starts. That is an artifact of the
    // discretization, not a constraint boundary, so strict mode forgives
    // those corners instead of declaring the whole cell unsafe.
    const double t_reach =
        s < static_cast<int>(grid.t_earliest_s.size()) ? grid.t_earliest_s[s] : -kInf;
    double wsum = 0.0, acc = 0.0;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            for (int c = 0; c < 2; ++c) {
                const double w = wv[a] * wx[b] * wt[c];
                if (w == 0.0) continue;
                const double val = layer[grid.node(s, iv[a], ix[b], it[c])];
                if (!is_finite_cost(val)) {
                    if (strict && ta.at(it[c]) >= t_reach - 1e-9) {
                        return false;  // a carrying corner is infeasible
                    }
                    continue;
                }
                wsum += w;
                acc += w * val;
            }
        }
    }
    if (wsum < 1e-12) return false;
    out = acc / wsum;
    return true;
}

double ValueFunction::value(int s, const EgoState& x) const {
    if (s < 0 || s > grid.steps) {
        throw ExtrapolationError("value query at step " + std::to_string(s));
    }
    if (!grid.v_axes[s].contains(x.v_mps) || !grid.soc_axis.contains(x.soc) ||
        !grid.t_axes[s].contains(x.time_s)) {
        throw ExtrapolationError("state off the grid hull at step " + std::to_string(s) +
                                 ": v=" + fmt_g(x.v_mps) + " soc=" + fmt_g(x.soc) +
                                 " t=" + fmt_g(x.time_s));
    }
    double out;
    if (!try_value(s, x.v_mps, x.soc, x.time_s, out)) {
        throw NoSolutionError("every neighbor infeasible at step " + std::to_string(s));
    }
    return out;
}

namespace {

void write_axis(std::ostream& out, const char* name, int s, const Axis& ax) {
    out << name;
    if (s >= 0) out << " " << s;
    out << " " << fmt_g(ax.lo, 17) << " " << fmt_g(ax.step, 17) << " " << ax.count << "\n";
}

Axis parse_axis(std::istringstream& in) {
    Axis ax;
    if (!(in >> ax.lo >> ax.step >> ax.count) || ax.count < 1) {
        throw ConfigError("value function file: bad axis line");
    }
    return ax;
}

}  // namespace

void save_value_function(const ValueFunction& vf, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << "ecodrive-vf 2\n";
    out << "gamma " << fmt_g(vf.gamma, 17) << "\n";
    out << "scenario_hash " << hex64(vf.scenario_hash) << "\n";
    out << "interp " << (vf.grid.interp == InterpMode::Nearest ? "nearest" : "multilinear") << "\n";
    out << "ds " << fmt_g(vf.grid.ds_m, 17) << "\n";
    out << "steps " << vf.grid.steps << "\n";
    out << "offset " << vf.grid.step_offset << "\n";
    out << "accel_grid";
    for (double a : vf.grid.accel_grid) out << " " << fmt_g(a, 17);
    out << "\n";
    write_axis(out, "soc_axis", -1, vf.grid.soc_axis);
    for (int s = 0; s <= vf.grid.steps; ++s) write_axis(out, "v_axis", s, vf.grid.v_axes[s]);
    for (int s = 0; s <= vf.grid.steps; ++s) write_axis(out, "t_axis", s, vf.grid.t_axes[s]);
    out << "t_earliest";
    for (double t : vf.grid.t_earliest_s) out << " " << fmt_g(t, 17);
    out << "\n";
    out << "data\n";
    std::vector<float> buf;
    for (int s = 0; s <= vf.grid.steps; ++s) {
        const auto& layer = vf.J[s];
        buf.resize(layer.size());
        for (std::size_t i = 0; i < layer.size(); ++i) buf[i] = static_cast<float>(layer[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
        out.write(reinterpret_cast<const char*>(vf.policy[s].data()),
                  static_cast<std::streamsize>(vf.policy[s].size()));
    }
    if (!out) throw ConfigError("write failed for " + path);
}

ValueFunction load_value_function(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    ValueFunction vf;
    std::string line;
    if (!std::getline(in, line) || line.rfind("ecodrive-vf ", 0) != 0) {
        throw ConfigError(path + ": not a value-function file");
    }
    if (line != "ecodrive-vf 2") {
        throw ConfigError(path + ": stale value-function format, regenerate the file");
    }
    bool have_steps = false;
    while (std::getline(in, line)) {
        if (line == "data") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "gamma") {
            ls >> vf.gamma;
        } else if (key == "scenario_hash") {
            std::string h;
            ls >> h;
            vf.scenario_hash = std::stoull(h, nullptr, 16);
        } else if (key == "interp") {
            std::string m;
            ls >> m;
            vf.grid.interp = (m == "nearest") ? InterpMode::Nearest : InterpMode::Multilinear;
        } else if (key == "ds") {
            ls >> vf.grid.ds_m;
        } else if (key == "steps") {
            ls >> vf.grid.steps;
            if (vf.grid.steps < 0) throw ConfigError(path + ": bad step count");
            vf.grid.v_axes.assign(vf.grid.steps + 1, Axis{});
            vf.grid.t_axes.assign(vf.grid.steps + 1, Axis{});
            have_steps = true;
        } else if (key == "offset") {
            ls >> vf.grid.step_offset;
        } else if (key == "accel_grid") {
            double a;
            vf.grid.accel_grid.clear();
            while (ls >> a) vf.grid.accel_grid.push_back(a);
        } else if (key == "soc_axis") {
            vf.grid.soc_axis = parse_axis(ls);
        } else if (key == "t_earliest") {
            double t;
            vf.grid.t_earliest_s.clear();
            while (ls >> t) vf.grid.t_earliest_s.push_back(t);
        } else if (key == "v_axis" || key == "t_axis") {
            if (!have_steps) throw ConfigError(path + ": axis before step count");
            int s;
            ls >> s;
            if (s < 0 || s > vf.grid.steps) throw ConfigError(path + ": axis step out of range");
            (key == "v_axis" ? vf.grid.v_axes : vf.grid.t_axes)[s] = parse_axis(ls);
        } else {
            throw ConfigError(path + ": unknown header key '" + key + "'");
        }
    }
    if (!have_steps || line != "data") throw ConfigError(path + ": truncated header");
    if (!vf.grid.t_earliest_s.empty() &&
        vf.grid.t_earliest_s.size() != static_cast<std::size_t>(vf.grid.steps) + 1) {
        throw ConfigError(path + ": t_earliest length does not match the step count");
    }
    vf.J.resize(vf.grid.steps + 1);
    vf.policy.resize(vf.grid.steps + 1);
    std::vector<float> buf;
    for (int s = 0; s <= vf.grid.steps; ++s) {
        const std::size_t n = vf.grid.layer_size(s);
        buf.resize(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
        vf.policy[s].resize(n);
        in.read(reinterpret_cast<char*>(vf.policy[s].data()), static_cast<std::streamsize>(n));
        if (!in) throw ConfigError(path + ": truncated data at layer " + std::to_string(s));
        vf.J[s].resize(n);
        for (std::size_t i = 0; i < n; ++i) vf.J[s][i] = static_cast<double>(buf[i]);
    }
    return vf;
}

void dump_value_csv(const ValueFunction& vf, const std::string& path, int stride) {
    if (stride < 1) stride = 1;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << "s,v,soc,t,J\n";
    for (int s = 0; s <= vf.grid.steps; s += stride) {
        const Axis& va = vf.grid.v_axes[s];
        const Axis& xa = vf.grid.soc_axis;
        const Axis& ta = vf.grid.t_axes[s];
        for (int iv = 0; iv < va.count; iv += stride) {
            for (int ixi = 0; ixi < xa.count; ixi += stride) {
                for (int it = 0; it < ta.count; it += stride) {
                    out << s << "," << fmt_g(va.at(iv)) << "," << fmt_g(xa.at(ixi)) << ","
                        << fmt_g(ta.at(it)) << ","
                        << fmt_g(vf.J[s][vf.grid.node(s, iv, ixi, it)]) << "\n";
                }
            }
        }
    }
}

}  // namespace ecodrive
