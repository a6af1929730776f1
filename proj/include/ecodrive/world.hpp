#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ecodrive/common.hpp"

namespace ecodrive {

// Fixed-cycle signal; green spans [offset, offset + green_s) within each cycle.
struct TrafficLight {
    double position_m = 0.0;
    double cycle_s = 60.0;
    double green_s = 30.0;
    double offset_s = 0.0;
};

struct SignalState {
    bool green = false;
    double t_rg_s = 0.0;        // time to next green start; 0 while green
    double green_start_s = 0.0; // current window when green, next window when red
    double green_end_s = 0.0;   // exclusive
};

SignalState signal_phase(const TrafficLight& light, double t_s);

// Space-time congestion window with a linear speed-density relation.
struct TrafficJam {
    double x_start_m = 0.0;
    double x_end_m = 0.0;
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    double density_veh_per_km = 100.0;
    double greenshield_c1 = 0.1;   // m/s per veh/km
    double greenshield_c2 = 20.0;  // free-flow speed, m/s

    bool contains(double x_m, double t_s) const {
        return x_m >= x_start_m && x_m <= x_end_m && t_s >= t_start_s && t_s <= t_end_s;
    }
};

// c2 - c1 * density; throws ConfigError when that implies a standstill.
double jam_speed(const TrafficJam& jam);

// Limit v applies from x onward, until the next change point.
struct SpeedLimitPoint {
    double x_m = 0.0;
    double v_mps = 0.0;
};

struct Route {
    double length_m = 0.0;
    double ds_m = 10.0;
    std::vector<SpeedLimitPoint> limits{{0.0, 17.0}};
    double min_speed_mps = 0.0;
    std::vector<TrafficLight> lights;
    std::vector<TrafficJam> jams;

    void validate() const;
    int step_count() const;  // length / ds, validated integral
    double base_limit(double x_m) const;
    const SpeedLimitPoint* next_limit_change(double x_m) const;  // strictly ahead, or null
    const TrafficLight* next_light(double x_m) const;            // strictly ahead, or null
    int light_index_at_step(int s) const;                        // -1 when no light at node s
};

// Minimum of jam speeds over covering windows, base limit otherwise;
// never below the route's minimum speed.
double effective_speed_limit(const Route& route, double x_m, double t_s);

struct LeadSample {
    double t_s = 0.0;
    double x_m = 0.0;
    double v_mps = 0.0;
};

// Sampled lead-vehicle motion. Queries interpolate linearly and throw
// ExtrapolationError outside the sampled span.
struct LeadTrajectory {
    std::vector<LeadSample> samples;
    std::string source = "synthetic";  // dp | replayed | synthetic

    void validate() const;
    double t_min() const { return samples.front().t_s; }
    double t_max() const { return samples.back().t_s; }
    double x_min() const { return samples.front().x_m; }
    double x_max() const { return samples.back().x_m; }
    double time_at(double x_m) const;  // first arrival at position x
    double pos_at(double t_s) const;
    double vel_at(double t_s) const;
};

LeadTrajectory load_lead_csv(const std::string& path, const std::string& source);
void save_lead_csv(const LeadTrajectory& lead, const std::string& path);

struct Scenario {
    std::string name = "unnamed";
    Route route;
    std::optional<LeadTrajectory> lead;
    std::string lead_csv;  // path recorded in the scenario file; empty when none

    double ego_v0_mps = 10.0;
    double ego_soc0 = 0.30;
    double ego_t0_s = 0.0;

    void validate() const;
};

Scenario build_scenario(const std::string& id);  // "route1" or "route2"
Scenario load_scenario(const std::string& path);
std::string scenario_text(const Scenario& sc);
void save_scenario(const Scenario& sc, const std::string& path);

}  // namespace ecodrive
