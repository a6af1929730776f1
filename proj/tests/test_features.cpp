#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ecodrive/dp.hpp"
#include "ecodrive/features.hpp"

using namespace ecodrive;

namespace {

Route demo_route() {
    Route r;
    r.length_m = 2000.0;
    r.ds_m = 10.0;
    r.limits = {{0.0, 17.0}, {1600.0, 13.0}};
    r.lights = {{1700.0, 30.0, 10.0, 0.0}};
    return r;
}

// Constant-speed lead that passed x = 0 five seconds before the ego start.
LeadTrajectory constant_lead(double v_mps, double x_span_m) {
    LeadTrajectory lead;
    lead.source = "synthetic";
    const double dt = 2.5;
    const int n = static_cast<int>(std::ceil(x_span_m / (v_mps * dt)));
    for (int k = 0; k <= n; ++k) {
        const double t = -5.0 + k * dt;
        lead.samples.push_back({t, v_mps * (t + 5.0), v_mps});
    }
    lead.validate();
    return lead;
}

Scenario tiny_scenario(bool with_lead) {
    Scenario sc;
    sc.name = "tiny";
    sc.route.length_m = 60.0;
    sc.route.ds_m = 10.0;
    sc.route.limits = {{0.0, 15.0}};
    sc.route.lights = {{30.0, 10.0, 5.0, 0.0}};
    // Fast lead: long past the sampling window at late node times, so the
    // window filter has something to reject.
    if (with_lead) sc.lead = constant_lead(15.0, 650.0);
    sc.ego_v0_mps = 10.0;
    sc.ego_soc0 = 0.30;
    sc.ego_t0_s = 0.0;
    return sc;
}

GridSpec tiny_spec() {
    GridSpec spec;
    spec.dv_mps = 1.0;
    spec.dsoc = 0.005;
    spec.soc_below = 0.015;
    spec.soc_above = 0.015;
    spec.dt_s = 1.0;
    spec.slow_avg_mps = 3.0;
    spec.time_slack_s = 15.0;
    spec.interp = InterpMode::Nearest;
    spec.accel_grid = {-1.0, 0.0, 1.0};
    return spec;
}

ValueFunction solve(const Scenario& sc, const GridSpec& spec) {
    VehicleParams p;
    DpConfig cfg;
    DpProblem prob(sc, p, build_grid(sc, p, spec), cfg);
    return backward_induction(prob);
}

LeadObservation lead_seen_from(const LeadTrajectory& lead, double x, double t) {
    const double tq = std::clamp(t, lead.t_min(), lead.t_max());
    return {lead.pos_at(tq) - x, lead.vel_at(tq)};
}

}  // namespace

TEST_CASE("ag features read route geometry and signal phase") {
    const Route r = demo_route();
    const EgoState st{15.0, 0.4, 100.0};

    SUBCASE("mid-route layout") {
        const FeatureVectorAg f = extract_features_ag(r, st, 150);
        CHECK(f[0] == 0.4);
        CHECK(f[1] == 15.0);
        CHECK(f[2] == -2.0);   // limit 17 here
        CHECK(f[3] == 2.0);    // 13 from 1600 m on
        CHECK(f[4] == 200.0);  // light at 1700
        CHECK(f[5] == 100.0);
        CHECK(f[6] == 500.0);
        // cycle 30 / green 10: t+{0..25} lands red,red,red,red,green,green
        const double want[6] = {-1, -1, -1, -1, 1, 1};
        for (int k = 0; k < 6; ++k) CHECK(f[7 + k] == want[k]);
    }

    SUBCASE("nearly always-green light samples to all plus one") {
        Route rg = r;
        rg.lights = {{1700.0, 30.0, 29.999, 0.0}};
        const FeatureVectorAg f = extract_features_ag(rg, EgoState{15.0, 0.4, 0.0}, 150);
        for (int k = 0; k < 6; ++k) CHECK(f[7 + k] == 1.0);
    }

    SUBCASE("no light ahead falls back to remaining distance") {
        Route rn = r;
        rn.lights.clear();
        const FeatureVectorAg f = extract_features_ag(rn, st, 150);
        CHECK(f[4] == f[6]);
        for (int k = 0; k < 6; ++k) CHECK(f[7 + k] == 1.0);
    }

    SUBCASE("no limit change ahead mirrors the current offset") {
        Route rs = r;
        rs.limits = {{0.0, 17.0}};
        const FeatureVectorAg f = extract_features_ag(rs, st, 150);
        CHECK(f[3] == f[2]);
        CHECK(f[5] == f[6]);
    }

    SUBCASE("route end") {
        const FeatureVectorAg f = extract_features_ag(r, st, 200);
        CHECK(f[2] == 2.0);  // limit 13 past 1600
        CHECK(f[4] == 0.0);
        CHECK(f[5] == 0.0);
        CHECK(f[6] == 0.0);
        for (int k = 0; k < 6; ++k) CHECK(f[7 + k] == 1.0);
    }

    SUBCASE("steps outside the route throw") {
        CHECK_THROWS_AS(extract_features_ag(r, st, -1), ConfigError);
        CHECK_THROWS_AS(extract_features_ag(r, st, 201), ConfigError);
    }
}

TEST_CASE("aw features append the lead block") {
    const Route r = demo_route();
    const EgoState st{15.0, 0.4, 100.0};

    SUBCASE("uniform closure") {
        const FeatureVectorAw f = extract_features_aw(r, st, 150, {100.0, 10.0});
        const FeatureVectorAg ag = extract_features_ag(r, st, 150);
        for (int k = 0; k < kAgFeatureCount; ++k) CHECK(f[k] == ag[k]);
        CHECK(f[13] == 100.0);
        CHECK(f[14] == 5.0);
        CHECK(f[15] == 20.0);
    }

    SUBCASE("never closing saturates") {
        const FeatureVectorAw f = extract_features_aw(r, st, 150, {100.0, 15.0});
        CHECK(f[14] == 0.0);
        CHECK(f[15] == kTimeToLeadMax);
        const FeatureVectorAw g = extract_features_aw(r, st, 150, {100.0, 18.0});
        CHECK(g[15] == kTimeToLeadMax);
    }

    SUBCASE("glacial closure hits the cap, not a huge outlier") {
        const FeatureVectorAw f = extract_features_aw(r, st, 150, {100.0, 15.0 - 1e-8});
        CHECK(f[15] == kTimeToLeadMax);
    }

    SUBCASE("zero gap is zero time regardless of closure") {
        CHECK(extract_features_aw(r, st, 150, {0.0, 20.0})[15] == 0.0);
        CHECK(extract_features_aw(r, st, 150, {0.0, 5.0})[15] == 0.0);
    }

    SUBCASE("negative gap clamps to zero") {
        const FeatureVectorAw f = extract_features_aw(r, st, 150, {-3.0, 5.0});
        CHECK(f[13] == 0.0);
        CHECK(f[15] == 0.0);
    }
}

TEST_CASE("feature names line up with the layout") {
    const auto ag = feature_names(false);
    const auto aw = feature_names(true);
    REQUIRE(static_cast<int>(ag.size()) == kAgFeatureCount);
    REQUIRE(static_cast<int>(aw.size()) == kAwFeatureCount);
    CHECK(ag[0] == "soc");
    CHECK(ag[2] == "v_rlim");
    CHECK(ag[7] == "x_tfc_0");
    CHECK(ag[12] == "x_tfc_5");
    for (int k = 0; k < kAgFeatureCount; ++k) CHECK(aw[k] == ag[k]);
    CHECK(aw[13] == "d_lead");
    CHECK(aw[15] == "t_to_lead");
}

TEST_CASE("datasets walk the grid in a fixed order") {
    const Scenario sc = tiny_scenario(true);
    const ValueFunction vf = solve(sc, tiny_spec());
    const StateGrid& g = vf.grid;
    const std::vector<DatasetSource> src = {{&sc, &vf}};

    SUBCASE("ag keeps exactly the finite nodes") {
        const Dataset ds = build_dataset(src, false, 0, 1);
        REQUIRE(ds.feature_count == kAgFeatureCount);

        std::size_t row = 0, finite = 0, total = 0;
        for (int s = 0; s <= g.steps; ++s) {
            for (int iv = 0; iv < g.v_axes[s].count; ++iv) {
                for (int ixi = 0; ixi < g.soc_axis.count; ++ixi) {
                    for (int it = 0; it < g.t_axes[s].count; ++it) {
                        ++total;
                        const double J = vf.J[s][g.node(s, iv, ixi, it)];
                        if (!is_finite_cost(J)) continue;
                        ++finite;
                        REQUIRE(row < ds.size());
                        const EgoState node{g.v_axes[s].at(iv), g.soc_axis.at(ixi),
                                            g.t_axes[s].at(it)};
                        const FeatureVectorAg want = extract_features_ag(sc.route, node, s);
                        const double* got = ds.row(row);
                        for (int k = 0; k < kAgFeatureCount; ++k) CHECK(got[k] == want[k]);
                        CHECK(ds.y[row] == J);
                        CHECK(ds.y[row] >= 0.0);
                        CHECK(ds.sources[row].scenario == 0);
                        CHECK(ds.sources[row].step == s);
                        ++row;
                    }
                }
            }
        }
        CHECK(ds.size() == finite);
        CHECK(ds.stats.kept == finite);
        CHECK(ds.stats.nodes_seen == total);
        CHECK(ds.stats.skipped_nonfinite == total - finite);
        CHECK(ds.stats.skipped_negative == 0);
        CHECK(ds.stats.skipped_no_lead == 0);
    }

    SUBCASE("aw filters nodes whose lead left the window") {
        const Dataset ds = build_dataset(src, true, 0, 1);
        REQUIRE(ds.feature_count == kAwFeatureCount);
        CHECK(ds.stats.skipped_no_lead > 0);
        CHECK(ds.stats.kept + ds.stats.skipped_no_lead + ds.stats.skipped_nonfinite ==
              ds.stats.nodes_seen);

        std::size_t row = 0;
        for (int s = 0; s <= g.steps; ++s) {
            const double x = s * g.ds_m;
            for (int iv = 0; iv < g.v_axes[s].count; ++iv) {
                for (int ixi = 0; ixi < g.soc_axis.count; ++ixi) {
                    for (int it = 0; it < g.t_axes[s].count; ++it) {
                        const double J = vf.J[s][g.node(s, iv, ixi, it)];
                        if (!is_finite_cost(J)) continue;
                        const EgoState node{g.v_axes[s].at(iv), g.soc_axis.at(ixi),
                                            g.t_axes[s].at(it)};
                        const LeadObservation obs = lead_seen_from(*sc.lead, x, node.time_s);
                        if (obs.d_lead_m < 0.0 || obs.d_lead_m > kLeadSampleWindowM) continue;
                        REQUIRE(row < ds.size());
                        const FeatureVectorAw want =
                            extract_features_aw(sc.route, node, s, obs);
                        const double* got = ds.row(row);
                        for (int k = 0; k < kAwFeatureCount; ++k) CHECK(got[k] == want[k]);
                        CHECK(ds.y[row] == J);
                        ++row;
                    }
                }
            }
        }
        CHECK(ds.size() == row);
    }
}

TEST_CASE("dataset thinning is seeded and sized") {
    const Scenario sc = tiny_scenario(true);
    const ValueFunction vf = solve(sc, tiny_spec());
    const std::vector<DatasetSource> src = {{&sc, &vf}};

    const Dataset full = build_dataset(src, false, 0, 1);
    REQUIRE(full.size() > 300);
    const std::size_t budget = full.size() / 3;

    const Dataset a = build_dataset(src, false, budget, 42);
    const Dataset b = build_dataset(src, false, budget, 42);
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    CHECK(a.stats.kept == b.stats.kept);

    const Dataset c = build_dataset(src, false, budget, 43);
    CHECK(a.y != c.y);

    const double kept = static_cast<double>(a.stats.kept);
    CHECK(kept > 0.75 * budget);
    CHECK(kept < 1.25 * budget);
}

TEST_CASE("a jam raises labels at states it squeezes") {
    Scenario sc_a;
    sc_a.name = "open";
    sc_a.route.length_m = 200.0;
    sc_a.route.ds_m = 10.0;
    sc_a.route.limits = {{0.0, 15.0}};
    sc_a.route.lights = {{100.0, 20.0, 10.0, 5.0}};
    sc_a.lead = constant_lead(8.0, 400.0);
    sc_a.ego_v0_mps = 10.0;
    sc_a.ego_soc0 = 0.30;

    Scenario sc_b = sc_a;
    sc_b.name = "jammed";
    TrafficJam jam;
    jam.x_start_m = 60.0;
    jam.x_end_m = 120.0;
    jam.t_start_s = 8.0;
    jam.t_end_s = 40.0;
    jam.density_veh_per_km = 100.0;
    jam.greenshield_c1 = 0.15;
    jam.greenshield_c2 = 20.0;  // jam speed 5 m/s
    sc_b.route.jams = {jam};

    GridSpec spec = tiny_spec();
    spec.time_slack_s = 15.0;
    const ValueFunction va = solve(sc_a, spec);
    const ValueFunction vb = solve(sc_b, spec);

    // The jam window leaves band time outside it at every position, so the
    // two grids must agree node for node; the comparison below relies on it.
    REQUIRE(va.grid.steps == vb.grid.steps);
    for (int s = 0; s <= va.grid.steps; ++s) {
        REQUIRE(va.grid.v_axes[s].lo == vb.grid.v_axes[s].lo);
        REQUIRE(va.grid.v_axes[s].count == vb.grid.v_axes[s].count);
        REQUIRE(va.grid.t_axes[s].lo == vb.grid.t_axes[s].lo);
        REQUIRE(va.grid.t_axes[s].count == vb.grid.t_axes[s].count);
    }

    std::size_t strict = 0;
    for (int s = 0; s <= va.grid.steps; ++s) {
        for (std::size_t i = 0; i < va.J[s].size(); ++i) {
            const double ja = va.J[s][i];
            const double jb = vb.J[s][i];
            if (!is_finite_cost(ja) || !is_finite_cost(jb)) continue;
            CHECK(jb >= ja - 1e-12);
            if (jb > ja + 1e-6) ++strict;
        }
    }
    CHECK(strict > 0);

    // And the datasets inherit those labels one for one.
    const std::vector<DatasetSource> src_b = {{&sc_b, &vb}};
    const Dataset aw = build_dataset(src_b, true, 0, 1);
    CHECK(aw.size() > 0);
    for (std::size_t i = 0; i < aw.size(); ++i) {
        CHECK(aw.y[i] >= 0.0);
        CHECK(is_finite_cost(aw.y[i]));
    }
}

TEST_CASE("dataset csv export carries the schema") {
    const Scenario sc = tiny_scenario(true);
    const ValueFunction vf = solve(sc, tiny_spec());
    const Dataset ds = build_dataset({{&sc, &vf}}, true, 500, 9);
    REQUIRE(ds.size() > 0);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ecodrive_features_test";
    fs::create_directories(dir);
    const std::string path = (dir / "aw.csv").string();
    save_dataset_csv(ds, path);

    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    std::string want;
    for (const std::string& n : feature_names(true)) want += n + ',';
    want += "label,scenario,step";
    CHECK(header == want);

    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == ds.size());

    // First row round-trips exactly through the %.17g formatting.
    std::ifstream again(path);
    std::getline(again, line);
    std::getline(again, line);
    const std::vector<std::string> cells = split(line, ',');
    REQUIRE(cells.size() == static_cast<std::size_t>(kAwFeatureCount) + 3);
    for (int k = 0; k < kAwFeatureCount; ++k) {
        CHECK(std::stod(cells[k]) == ds.row(0)[k]);
    }
    CHECK(std::stod(cells[kAwFeatureCount]) == ds.y[0]);
    fs::remove_all(dir);
}

TEST_CASE("dataset construction rejects bad sources") {
    const Scenario with_lead = tiny_scenario(true);
    const Scenario no_lead = tiny_scenario(false);
    const ValueFunction vf = solve(with_lead, tiny_spec());

    CHECK_THROWS_AS(build_dataset({}, false, 0, 1), ConfigError);
    CHECK_THROWS_AS(build_dataset({{nullptr, &vf}}, false, 0, 1), ConfigError);
    CHECK_THROWS_AS(build_dataset({{&with_lead, nullptr}}, false, 0, 1), ConfigError);
    CHECK_THROWS_AS(build_dataset({{&no_lead, &vf}}, true, 0, 1), ConfigError);

    ValueFunction off_gamma = vf;
    off_gamma.gamma = 0.5;
    CHECK_THROWS_AS(build_dataset({{&with_lead, &vf}, {&with_lead, &off_gamma}}, false, 0, 1),
                    ConfigError);

    Scenario short_route = with_lead;
    short_route.route.length_m = 30.0;
    short_route.route.lights.clear();
    CHECK_THROWS_AS(build_dataset({{&short_route, &vf}}, false, 0, 1), ConfigError);
}
