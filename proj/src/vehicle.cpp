#include "ecodrive/vehicle.hpp"

#include <cmath>
#include <sstream>

namespace ecodrive {

void VehicleParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("vehicle params: ") + what);
    };
    require(equiv_mass_kg > 0, "equiv_mass_kg must be > 0");
    require(batt_capacity_C > 0, "batt_capacity_C must be > 0");
    require(lhv_J_per_g > 0, "lhv_J_per_g must be > 0");
    require(fuel_norm_gps > 0, "fuel_norm_gps must be > 0");
    require(road_a0_N >= 0 && road_a2_Ns2pm2 >= 0, "road load a0, a2 must be >= 0");
    // a1 may be negative as long as the polynomial stays nonnegative; the
    // quadratic minimum sits at v* = -a1/(2 a2).
    if (road_a1_Nspm < 0 && road_a2_Ns2pm2 > 0) {
        double vstar = -road_a1_Nspm / (2.0 * road_a2_Ns2pm2);
        double fmin = road_a0_N + road_a1_Nspm * vstar + road_a2_Ns2pm2 * vstar * vstar;
        require(fmin >= 0, "road load goes negative on v >= 0");
    } else {
        require(road_a1_Nspm >= 0 || road_a2_Ns2pm2 > 0, "road load goes negative for large v");
    }
    for (double s : {0.0, 0.5, 1.0}) {
        require(ocv_V(s) > 0, "ocv must be positive on [0,1]");
        require(resistance_ohm(s) > 0, "resistance must be positive on [0,1]");
    }
    require(accel_min_mps2 < accel_max_mps2, "accel bounds out of order");
    require(force_min_N < force_max_N, "force bounds out of order");
    require(regen_eff >= 0 && regen_eff <= 1, "regen_eff must be in [0,1]");
    require(fuel_idle_gps >= 0 && willans_gpJ >= 0, "fuel surrogate coefficients must be >= 0");
    require(aux_elec_W >= 0, "aux_elec_W must be >= 0");
}

double road_load(double v_mps, const VehicleParams& p) {
    if (v_mps < 0) throw std::domain_error("road_load: negative speed");
    return p.road_a0_N + p.road_a1_Nspm * v_mps + p.road_a2_Ns2pm2 * v_mps * v_mps;
}

VelocityStep step_velocity(double v_mps, double f_tr_N, const VehicleParams& p, double ds_m) {
    if (v_mps < 0) throw std::domain_error("step_velocity: negative speed");
    if (ds_m <= 0) throw std::domain_error("step_velocity: ds must be > 0");
    const double radicand =
        v_mps * v_mps + 2.0 * ds_m * (f_tr_N - road_load(v_mps, p)) / p.equiv_mass_kg;
    if (radicand < 0) return {0.0, true};
    return {std::sqrt(radicand), false};
}

bool battery_current_opt(double soc, double p_dmd_W, const VehicleParams& p, double& current_A) {
    const double voc = p.ocv_V(soc);
    const double r0 = p.resistance_ohm(soc);
    const double disc = voc * voc - 4.0 * r0 * p_dmd_W;
    if (disc < 0) return false;
    current_A = (voc - std::sqrt(disc)) / (2.0 * r0);
    return true;
}

double battery_current(double soc, double p_dmd_W, const VehicleParams& p) {
    double i = 0.0;
    if (!battery_current_opt(soc, p_dmd_W, p, i)) {
        const double voc = p.ocv_V(soc);
        const double r0 = p.resistance_ohm(soc);
        throw InfeasiblePowerError("battery demand " + fmt_g(p_dmd_W) + " W exceeds max " +
                                   fmt_g(voc * voc / (4.0 * r0)) + " W at soc " + fmt_g(soc));
    }
    return i;
}

SocStep step_soc(double soc, double p_dmd_W, double v_bar_mps, double ds_m, const VehicleParams& p) {
    if (v_bar_mps <= 0) throw std::domain_error("step_soc: v_bar must be > 0 for a moving segment");
    if (soc < 0 || soc > 1) throw std::domain_error("step_soc: soc outside [0,1]");
    const double current = battery_current(soc, p_dmd_W, p);
    double next = soc - ds_m / (v_bar_mps * p.batt_capacity_C) * current;
    bool saturated = false;
    if (next < 0) { next = 0; saturated = true; }
    if (next > 1) { next = 1; saturated = true; }
    return {next, saturated};
}

double step_time(double t_s, double v_bar_mps, double ds_m, bool at_red_light, double t_rg_s) {
    if (ds_m <= 0) throw std::domain_error("step_time: ds must be > 0");
    if (at_red_light && v_bar_mps == 0.0) return t_s + t_rg_s;
    if (v_bar_mps <= 0) throw std::domain_error("step_time: v_bar must be > 0 outside a light stop");
    return t_s + ds_m / v_bar_mps;
}

PowerFlows power_split(double v_mps, double f_tr_N, bool engine_on, const VehicleParams& p) {
    if (f_tr_N < p.force_min_N || f_tr_N > p.force_max_N) {
        throw ConstraintError("tractive force " + fmt_g(f_tr_N) + " N outside bounds");
    }
    PowerFlows f;
    f.tractive_force_N = f_tr_N;
    f.road_load_N = road_load(v_mps, p);
    f.tractive_power_W = f_tr_N * v_mps;
    if (engine_on) {
        f.fuel_rate_gps = std::max(p.fuel_idle_gps,
                                   p.fuel_idle_gps + p.willans_gpJ * f.tractive_power_W);
        f.elec_demand_W = p.aux_elec_W;
    } else {
        f.fuel_rate_gps = 0.0;
        const double traction = f.tractive_power_W >= 0
                                    ? f.tractive_power_W
                                    : p.regen_eff * f.tractive_power_W;
        f.elec_demand_W = traction + p.aux_elec_W;
    }
    f.batt_power_W = f.elec_demand_W;
    f.equiv_fuel_rate_gps = f.fuel_rate_gps + p.k_batt * f.batt_power_W / p.lhv_J_per_g;
    return f;
}

double stage_cost(const PowerFlows& flows, double dt_s, double gamma, const VehicleParams& p) {
    if (dt_s <= 0) throw std::domain_error("stage_cost: dt must be > 0");
    if (gamma < 0 || gamma > 1) throw std::domain_error("stage_cost: gamma outside [0,1]");
    return (gamma * flows.equiv_fuel_rate_gps / p.fuel_norm_gps + (1.0 - gamma)) * dt_s;
}

namespace {

struct ParamField {
    const char* key;
    double VehicleParams::* member;
    const char* comment;
};

const ParamField kFields[] = {
    {"equiv_mass_kg", &VehicleParams::equiv_mass_kg, "equivalent vehicle mass [kg]"},
    {"road_a0", &VehicleParams::road_a0_N, "road load constant term [N]"},
    {"road_a1", &VehicleParams::road_a1_Nspm, "road load linear term [N s/m]"},
    {"road_a2", &VehicleParams::road_a2_Ns2pm2, "road load quadratic term [N s^2/m^2]"},
    {"batt_capacity_C", &VehicleParams::batt_capacity_C, "nominal battery capacity [coulomb]"},
    {"lhv_J_per_g", &VehicleParams::lhv_J_per_g, "fuel lower heating value [J/g]"},
    {"k_batt", &VehicleParams::k_batt, "battery-to-fuel conversion factor [-]"},
    {"fuel_norm_gps", &VehicleParams::fuel_norm_gps, "stage-cost fuel normalization [g/s]"},
    {"fuel_idle_gps", &VehicleParams::fuel_idle_gps, "engine idle fuel rate [g/s]"},
    {"willans_gpJ", &VehicleParams::willans_gpJ, "Willans slope [g/J]"},
    {"accel_min", &VehicleParams::accel_min_mps2, "acceleration lower bound [m/s^2]"},
    {"accel_max", &VehicleParams::accel_max_mps2, "acceleration upper bound [m/s^2]"},
    {"force_min", &VehicleParams::force_min_N, "tractive force lower bound [N]"},
    {"force_max", &VehicleParams::force_max_N, "tractive force upper bound [N]"},
    {"aux_elec_W", &VehicleParams::aux_elec_W, "auxiliary electrical load [W]"},
    {"regen_eff", &VehicleParams::regen_eff, "regenerative braking efficiency [-]"},
};

}  // namespace

std::string vehicle_params_text(const VehicleParams& p) {
    std::ostringstream out;
    out << "# vehicle parameters (flat key = value; SI units noted per key)\n";
    for (const auto& f : kFields) {
        out << f.key << " = " << fmt_g(p.*(f.member)) << "  # " << f.comment << "\n";
    }
    out << "ocv_v0 = " << fmt_g(p.ocv_V.c0) << "  # open-circuit voltage at soc=0 [V]\n";
    out << "ocv_v1 = " << fmt_g(p.ocv_V.c1) << "  # open-circuit voltage slope [V per soc]\n";
    out << "r0_ohm0 = " << fmt_g(p.resistance_ohm.c0) << "  # internal resistance at soc=0 [ohm]\n";
    out << "r0_ohm1 = " << fmt_g(p.resistance_ohm.c1) << "  # internal resistance slope [ohm per soc]\n";
    return out.str();
}

void save_vehicle_params(const VehicleParams& p, const std::string& path) {
    write_text_file(path, vehicle_params_text(p));
}

VehicleParams load_vehicle_params(const std::string& path) {
    // Reuses the INI tokenizer by wrapping the flat file in a synthetic section.
    IniFile ini = IniFile::parse("[v]\n" + read_text_file(path));
    VehicleParams p;
    for (const auto& f : kFields) {
        if (ini.has("v", f.key)) p.*(f.member) = ini.get_double("v", f.key);
    }
    p.ocv_V.c0 = ini.get_double_or("v", "ocv_v0", p.ocv_V.c0);
    p.ocv_V.c1 = ini.get_double_or("v", "ocv_v1", p.ocv_V.c1);
    p.resistance_ohm.c0 = ini.get_double_or("v", "r0_ohm0", p.resistance_ohm.c0);
    p.resistance_ohm.c1 = ini.get_double_or("v", "r0_ohm1", p.resistance_ohm.c1);
    p.validate();
    return p;
}

}  // namespace ecodrive
