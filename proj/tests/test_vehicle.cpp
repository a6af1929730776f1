#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "ecodrive/vehicle.hpp"

using namespace ecodrive;

namespace {

// Battery with flat 360 V / 0.1 ohm curves so current values can be checked
// against the closed-form root by hand.
VehicleParams flat_battery_params() {
    VehicleParams p;
    p.ocv_V = {360.0, 0.0};
    p.resistance_ohm = {0.1, 0.0};
    p.batt_capacity_C = 108000.0;
    return p;
}

}  // namespace

TEST_CASE("road load polynomial") {
    VehicleParams p;
    p.road_a0_N = 150.0;
    p.road_a1_Nspm = 2.0;
    p.road_a2_Ns2pm2 = 0.4;
    CHECK(road_load(0.0, p) == 150.0);
    CHECK(road_load(10.0, p) == doctest::Approx(210.0).epsilon(1e-12));
    CHECK(road_load(20.0, p) == doctest::Approx(350.0).epsilon(1e-12));
    CHECK_THROWS_AS(road_load(-1.0, p), std::domain_error);
}

TEST_CASE("velocity step") {
    VehicleParams p;
    p.equiv_mass_kg = 2000.0;
    p.road_a0_N = 0.0;
    p.road_a1_Nspm = 0.0;
    p.road_a2_Ns2pm2 = 0.0;

    SUBCASE("zero net force keeps speed") {
        auto r = step_velocity(13.7, 0.0, p, 10.0);
        CHECK(r.v_next_mps == 13.7);
        CHECK_FALSE(r.over_brake);
    }
    SUBCASE("2000 N net over 10 m from 10 m/s") {
        auto r = step_velocity(10.0, 2000.0, p, 10.0);
        CHECK(r.v_next_mps == doctest::Approx(10.954451150103322).epsilon(1e-15));
        CHECK_FALSE(r.over_brake);
    }
    SUBCASE("over-braking clamps to standstill") {
        auto r = step_velocity(5.0, -10000.0, p, 10.0);
        CHECK(r.v_next_mps == 0.0);
        CHECK(r.over_brake);
    }
    SUBCASE("kinetic energy identity holds exactly up to the clamp") {
        VehicleParams q;  // defaults, nonzero road load
        for (double v : {0.5, 3.0, 8.0, 15.0, 22.0}) {
            for (double f : {-4000.0, -500.0, 0.0, 1200.0, 6000.0}) {
                auto r = step_velocity(v, f, q, 10.0);
                if (r.over_brake) continue;
                double lhs = q.equiv_mass_kg * (r.v_next_mps * r.v_next_mps - v * v) / 2.0;
                double rhs = 10.0 * (f - road_load(v, q));
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("battery current root") {
    VehicleParams p = flat_battery_params();

    CHECK(battery_current(0.5, 0.0, p) == 0.0);
    CHECK(battery_current(0.5, 36000.0, p) ==
          doctest::Approx(102.94372515228588).epsilon(1e-14));

    SUBCASE("quadratic is recovered to 1e-9 relative") {
        for (double pw : {-30000.0, -5000.0, 400.0, 36000.0, 200000.0, 323999.0}) {
            double i = battery_current(0.5, pw, p);
            double voc = p.ocv_V(0.5), r0 = p.resistance_ohm(0.5);
            CHECK(voc * i - r0 * i * i ==
                  doctest::Approx(pw).epsilon(1e-9));
        }
    }
    SUBCASE("regen gives negative current") {
        CHECK(battery_current(0.5, -10000.0, p) < 0.0);
    }
    SUBCASE("infeasible past 324 kW") {
        CHECK_NOTHROW(battery_current(0.5, 324000.0, p));
        CHECK_THROWS_AS(battery_current(0.5, 324000.1, p), InfeasiblePowerError);
        double i = 0.0;
        CHECK_FALSE(battery_current_opt(0.5, 3.3e5, p, i));
        CHECK(battery_current_opt(0.5, 3.2e5, p, i));
    }
    SUBCASE("soc-dependent curves with defaults") {
        VehicleParams d;
        // V_oc(0.3) = 358, R0(0.3) = 0.114
        double i = battery_current(0.3, 20000.0, d);
        CHECK(358.0 * i - 0.114 * i * i == doctest::Approx(20000.0).epsilon(1e-9));
    }
}

TEST_CASE("soc step") {
    VehicleParams p = flat_battery_params();

    SUBCASE("zero demand holds charge") {
        auto r = step_soc(0.42, 0.0, 12.0, 10.0, p);
        CHECK(r.soc_next == 0.42);
        CHECK_FALSE(r.saturated);
    }
    SUBCASE("36 kW at 10 m/s over 10 m drains 9.53e-4") {
        auto r = step_soc(0.30, 36000.0, 10.0, 10.0, p);
        CHECK(r.soc_next == doctest::Approx(0.29904681735970107).epsilon(1e-14));
        CHECK(0.30 - r.soc_next == doctest::Approx(9.531826402989433e-4).epsilon(1e-12));
        CHECK_FALSE(r.saturated);
    }
    SUBCASE("regen charges") {
        auto r = step_soc(0.30, -10000.0, 10.0, 10.0, p);
        CHECK(r.soc_next > 0.30);
    }
    SUBCASE("monotone in demand sign") {
        CHECK(step_soc(0.5, 500.0, 10.0, 10.0, p).soc_next < 0.5);
        CHECK(step_soc(0.5, -500.0, 10.0, 10.0, p).soc_next > 0.5);
    }
    SUBCASE("clamps with saturation flag") {
        auto hi = step_soc(0.999999, -300000.0, 1.0, 10.0, p);
        CHECK(hi.soc_next == 1.0);
        CHECK(hi.saturated);
        auto lo = step_soc(1e-7, 300000.0, 1.0, 10.0, p);
        CHECK(lo.soc_next == 0.0);
        CHECK(lo.saturated);
    }
    SUBCASE("stopped segment is a domain error") {
        CHECK_THROWS_AS(step_soc(0.3, 400.0, 0.0, 10.0, p), std::domain_error);
    }
}

TEST_CASE("time step") {
    CHECK(step_time(5.0, 5.0, 10.0, false, 0.0) == 7.0);
    CHECK(step_time(5.0, 20.0, 10.0, false, 0.0) == 5.5);
    CHECK(step_time(100.0, 0.0, 10.0, true, 17.0) == 117.0);
    // A light node reached while still rolling uses the ordinary branch.
    CHECK(step_time(100.0, 8.0, 10.0, true, 17.0) == 101.25);
    CHECK_THROWS_AS(step_time(0.0, 0.0, 10.0, false, 0.0), std::domain_error);
}

TEST_CASE("power split") {
    VehicleParams p;
    p.aux_elec_W = 300.0;

    SUBCASE("all-electric traction") {
        PowerFlows f = power_split(10.0, 1000.0, false, p);
        CHECK(f.tractive_power_W == 10000.0);
        CHECK(f.elec_demand_W == 10300.0);
        CHECK(f.fuel_rate_gps == 0.0);
        CHECK(f.batt_power_W == f.elec_demand_W);
        CHECK(f.equiv_fuel_rate_gps ==
              doctest::Approx(0.23953488372093024).epsilon(1e-15));
    }
    SUBCASE("regen at 0.6 efficiency") {
        PowerFlows f = power_split(10.0, -2000.0, false, p);
        CHECK(f.elec_demand_W == doctest::Approx(-11700.0).epsilon(1e-12));
        CHECK(f.fuel_rate_gps == 0.0);
    }
    SUBCASE("engine idles at zero tractive power") {
        PowerFlows f = power_split(10.0, 0.0, true, p);
        CHECK(f.fuel_rate_gps == p.fuel_idle_gps);
        CHECK(f.elec_demand_W == p.aux_elec_W);
    }
    SUBCASE("engine braking gets no regen and no sub-idle fuel") {
        PowerFlows f = power_split(10.0, -3000.0, true, p);
        CHECK(f.fuel_rate_gps == p.fuel_idle_gps);
        CHECK(f.elec_demand_W == p.aux_elec_W);
    }
    SUBCASE("engine covers traction via the linear surrogate") {
        PowerFlows f = power_split(15.0, 2000.0, true, p);
        CHECK(f.fuel_rate_gps ==
              doctest::Approx(p.fuel_idle_gps + p.willans_gpJ * 30000.0).epsilon(1e-12));
        CHECK(f.elec_demand_W == p.aux_elec_W);
    }
    SUBCASE("equivalent-fuel identity holds on every record") {
        for (bool eng : {false, true}) {
            for (double f_tr : {-9000.0, -2000.0, 0.0, 1500.0, 7500.0}) {
                for (double v : {0.0, 6.0, 18.0}) {
                    PowerFlows f = power_split(v, f_tr, eng, p);
                    CHECK(f.equiv_fuel_rate_gps ==
                          doctest::Approx(f.fuel_rate_gps +
                                          p.k_batt * f.batt_power_W / p.lhv_J_per_g)
                              .epsilon(1e-12));
                }
            }
        }
    }
    SUBCASE("force box enforced") {
        CHECK_THROWS_AS(power_split(10.0, 8000.1, false, p), ConstraintError);
        CHECK_THROWS_AS(power_split(10.0, -12000.1, false, p), ConstraintError);
    }
}

TEST_CASE("stage cost") {
    VehicleParams p;  // fuel_norm = 2.0 g/s
    PowerFlows f;

    SUBCASE("gamma 0 is pure time") {
        f.equiv_fuel_rate_gps = 123.0;
        CHECK(stage_cost(f, 0.8, 0.0, p) == 0.8);
    }
    SUBCASE("normalized rate 1 at gamma 1") {
        f.equiv_fuel_rate_gps = p.fuel_norm_gps;
        CHECK(stage_cost(f, 0.8, 1.0, p) == doctest::Approx(0.8).epsilon(1e-15));
    }
    SUBCASE("mixed") {
        f.equiv_fuel_rate_gps = 2.0 * p.fuel_norm_gps;
        CHECK(stage_cost(f, 2.0, 0.5, p) == doctest::Approx(3.0).epsilon(1e-15));
    }
    SUBCASE("affine in the fuel rate") {
        PowerFlows a, b, m;
        a.equiv_fuel_rate_gps = 0.4;
        b.equiv_fuel_rate_gps = 1.6;
        m.equiv_fuel_rate_gps = 1.0;
        double ca = stage_cost(a, 1.5, 0.65, p);
        double cb = stage_cost(b, 1.5, 0.65, p);
        CHECK(stage_cost(m, 1.5, 0.65, p) == doctest::Approx(0.5 * (ca + cb)).epsilon(1e-12));
    }
    SUBCASE("argument validation") {
        CHECK_THROWS_AS(stage_cost(f, 0.0, 0.5, p), std::domain_error);
        CHECK_THROWS_AS(stage_cost(f, 1.0, 1.5, p), std::domain_error);
    }
}

TEST_CASE("params validate") {
    VehicleParams p;
    CHECK_NOTHROW(p.validate());
    SUBCASE("mass") {
        p.equiv_mass_kg = 0.0;
        CHECK_THROWS_AS(p.validate(), ConfigError);
    }
    SUBCASE("resistance must stay positive over soc") {
        p.resistance_ohm = {0.12, -0.13};
        CHECK_THROWS_AS(p.validate(), ConfigError);
    }
    SUBCASE("accel bounds ordered") {
        p.accel_min_mps2 = 3.0;
        CHECK_THROWS_AS(p.validate(), ConfigError);
    }
    SUBCASE("regen efficiency in range") {
        p.regen_eff = 1.2;
        CHECK_THROWS_AS(p.validate(), ConfigError);
    }
}

TEST_CASE("params file round trip") {
    VehicleParams p;
    p.equiv_mass_kg = 1987.0;
    p.aux_elec_W = 512.0;
    p.ocv_V = {350.0, 55.0};
    const std::string path = "vehicle_params_roundtrip.txt";
    save_vehicle_params(p, path);
    VehicleParams q = load_vehicle_params(path);
    CHECK(q.equiv_mass_kg == p.equiv_mass_kg);
    CHECK(q.aux_elec_W == p.aux_elec_W);
    CHECK(q.ocv_V.c0 == p.ocv_V.c0);
    CHECK(q.ocv_V.c1 == p.ocv_V.c1);
    CHECK(q.regen_eff == p.regen_eff);
    CHECK(vehicle_params_text(q) == vehicle_params_text(p));
    std::remove(path.c_str());
}
