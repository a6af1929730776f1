#pragma once

#include <string>

#include "ecodrive/common.hpp"

namespace ecodrive {

struct AffineCurve {
    double c0 = 0.0;
    double c1 = 0.0;
    double operator()(double x) const { return c0 + c1 * x; }
};

/// Longitudinal + powertrain surrogate parameters. Units in field names;
/// state of charge is a fraction in [0,1] throughout.
struct VehicleParams {
    double equiv_mass_kg = 2200.0;

    // Road load F = a0 + a1*v + a2*v^2, v in m/s.
    double road_a0_N = 160.0;
    double road_a1_Nspm = 1.5;
    double road_a2_Ns2pm2 = 0.42;

    double batt_capacity_C = 3.6e5;           // coulomb
    AffineCurve ocv_V{340.0, 60.0};           // open-circuit voltage vs SoC
    AffineCurve resistance_ohm{0.12, -0.02};  // internal resistance vs SoC

    // Willans-line engine surrogate: mf = idle + slope * tractive power.
    double fuel_idle_gps = 0.15;
    double willans_gpJ = 6.9e-5;

    double lhv_J_per_g = 43000.0;
    double k_batt = 1.0;
    double fuel_norm_gps = 2.0;  // normalization rate in the stage cost

    double accel_min_mps2 = -3.0;
    double accel_max_mps2 = 2.0;
    double force_min_N = -12000.0;
    double force_max_N = 8000.0;

    double aux_elec_W = 400.0;
    double regen_eff = 0.6;

    /// Throws ConfigError when a positivity/sign invariant fails.
    void validate() const;
};

struct EgoState {
    double v_mps = 0.0;
    double soc = 0.3;
    double time_s = 0.0;
};

struct ControlInput {
    double accel_mps2 = 0.0;
    bool engine_on = false;
};

struct PowerFlows {
    double tractive_force_N = 0.0;
    double road_load_N = 0.0;
    double tractive_power_W = 0.0;
    double batt_power_W = 0.0;    // electrical power charged to the battery in the
                                  // equivalent-fuel term; equals elec_demand_W, the
                                  // resistive loss shows up only in the SoC drain
    double elec_demand_W = 0.0;   // terminal power demand fed to the SoC update
    double fuel_rate_gps = 0.0;
    double equiv_fuel_rate_gps = 0.0;
};

double road_load(double v_mps, const VehicleParams& p);

struct VelocityStep {
    double v_next_mps;
    bool over_brake;  // radicand went negative; clamped to standstill
};
VelocityStep step_velocity(double v_mps, double f_tr_N, const VehicleParams& p, double ds_m);

/// Smaller root of V_oc*I - R0*I^2 = P. Negative demand (regen) gives
/// negative current. Throws InfeasiblePowerError past V_oc^2/(4 R0).
double battery_current(double soc, double p_dmd_W, const VehicleParams& p);

/// Non-throwing variant for solver inner loops: false when infeasible.
bool battery_current_opt(double soc, double p_dmd_W, const VehicleParams& p, double& current_A);

struct SocStep {
    double soc_next;
    bool saturated;  // clamped to [0,1]
};
SocStep step_soc(double soc, double p_dmd_W, double v_bar_mps, double ds_m, const VehicleParams& p);

double step_time(double t_s, double v_bar_mps, double ds_m, bool at_red_light, double t_rg_s);

/// Engine-off: battery covers tractive power plus aux, regen at fixed
/// efficiency. Engine-on: Willans surrogate covers traction (fuel floored
/// at idle, no regen), battery covers aux only.
PowerFlows power_split(double v_mps, double f_tr_N, bool engine_on, const VehicleParams& p);

/// (gamma * mf_eq / mf_norm + (1 - gamma)) * dt. Uses per-step elapsed time.
double stage_cost(const PowerFlows& flows, double dt_s, double gamma, const VehicleParams& p);

VehicleParams load_vehicle_params(const std::string& path);
std::string vehicle_params_text(const VehicleParams& p);
void save_vehicle_params(const VehicleParams& p, const std::string& path);

}  // namespace ecodrive
