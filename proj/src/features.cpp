#include "ecodrive/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace ecodrive {

std::vector<std::string> feature_names(bool aw) {
    std::vector<std::string> names = {"soc",        "v_veh", "v_rlim", "v_rlim_next",
                                      "d_tfc",      "d_lim_next", "d_rem"};
    for (int k = 0; k < 6; ++k) names.push_back("x_tfc_" + std::to_string(k));
    if (aw) {
        names.push_back("d_lead");
        names.push_back("v_rel_lead");
        names.push_back("t_to_lead");
    }
    return names;
}

FeatureVectorAg extract_features_ag(const Route& route, const EgoState& state, int s) {
    if (s < 0 || s > route.step_count()) {
        throw ConfigError("features: step " + std::to_string(s) + " outside the route");
    }
    const double x = s * route.ds_m;
    const double d_rem = std::max(0.0, route.length_m - x);
    const double v_rlim = state.v_mps - route.base_limit(x);

    FeatureVectorAg f{};
    f[0] = state.soc;
    f[1] = state.v_mps;
    f[2] = v_rlim;
    f[6] = d_rem;

    if (const SpeedLimitPoint* chg = route.next_limit_change(x)) {
        f[3] = state.v_mps - chg->v_mps;
        f[5] = chg->x_m - x;
    } else {
        f[3] = v_rlim;
        f[5] = d_rem;
    }

    if (const TrafficLight* light = route.next_light(x)) {
        f[4] = light->position_m - x;
        for (int k = 0; k < 6; ++k) {
            f[7 + k] = signal_phase(*light, state.time_s + 5.0 * k).green ? 1.0 : -1.0;
        }
    } else {
        f[4] = d_rem;
        for (int k = 0; k < 6; ++k) f[7 + k] = 1.0;
    }
    return f;
}

FeatureVectorAw extract_features_aw(const Route& route, const EgoState& state, int s,
                                    const LeadObservation& obs) {
    const FeatureVectorAg ag = extract_features_ag(route, state, s);
    FeatureVectorAw f{};
    std::copy(ag.begin(), ag.end(), f.begin());

    const double d = std::max(0.0, obs.d_lead_m);
    const double v_rel = state.v_mps - obs.v_lead_mps;
    f[13] = d;
    f[14] = v_rel;
    if (d == 0.0) {
        f[15] = 0.0;
    } else if (v_rel <= 0.0) {
        f[15] = kTimeToLeadMax;
    } else {
        f[15] = std::min(kTimeToLeadMax, d / std::max(1e-6, v_rel));
    }
    return f;
}

namespace {

// Lead seen from a node at time t; query times clamp into the sampled span so
// early nodes read the first sample and late ones the last.
LeadObservation lead_at_node(const LeadTrajectory& lead, double x, double t) {
    const double tq = std::clamp(t, lead.t_min(), lead.t_max());
    return LeadObservation{lead.pos_at(tq) - x, lead.vel_at(tq)};
}

void check_sources(const std::vector<DatasetSource>& sources, bool aw) {
    if (sources.empty()) throw ConfigError("dataset: no sources");
    for (const DatasetSource& src : sources) {
        if (!src.scenario || !src.vf) throw ConfigError("dataset: null source entry");
        const Route& route = src.scenario->route;
        const StateGrid& g = src.vf->grid;
        if (g.ds_m != route.ds_m) throw ConfigError("dataset: grid step differs from route");
        if (g.step_offset + g.steps > route.step_count()) {
            throw ConfigError("dataset: value function window overruns the route");
        }
        if (src.vf->gamma != sources.front().vf->gamma) {
            throw ConfigError("dataset: sources solved with different gammas");
        }
        if (aw && !src.scenario->lead) {
            throw ConfigError("dataset: aw variant needs a lead in scenario '" +
                              src.scenario->name + "'");
        }
    }
}

}  // namespace

Dataset build_dataset(const std::vector<DatasetSource>& sources, bool aw,
                      std::size_t budget, std::uint64_t seed) {
    check_sources(sources, aw);

    // visit() walks every node in a fixed order; two passes share it, the
    // first to size the thinning probability, the second to emit rows.
    auto visit = [&](auto&& on_eligible, DatasetStats* stats) {
        for (std::size_t isrc = 0; isrc < sources.size(); ++isrc) {
            const Scenario& sc = *sources[isrc].scenario;
            const ValueFunction& vf = *sources[isrc].vf;
            const StateGrid& g = vf.grid;
            for (int s = 0; s <= g.steps; ++s) {
                const int abs_step = g.step_offset + s;
                const double x = abs_step * g.ds_m;
                const Axis& va = g.v_axes[s];
                const Axis& ta = g.t_axes[s];
                for (int iv = 0; iv < va.count; ++iv) {
                    for (int ixi = 0; ixi < g.soc_axis.count; ++ixi) {
                        for (int it = 0; it < ta.count; ++it) {
                            if (stats) ++stats->nodes_seen;
                            const double J = vf.J[s][g.node(s, iv, ixi, it)];
                            if (!is_finite_cost(J)) {
                                if (stats) ++stats->skipped_nonfinite;
                                continue;
                            }
                            if (J < 0.0) {
                                if (stats) ++stats->skipped_negative;
                                continue;
                            }
                            EgoState node{va.at(iv), g.soc_axis.at(ixi), ta.at(it)};
                            LeadObservation obs{};
                            if (aw) {
                                obs = lead_at_node(*sc.lead, x, node.time_s);
                                if (obs.d_lead_m < 0.0 || obs.d_lead_m > kLeadSampleWindowM) {
                                    if (stats) ++stats->skipped_no_lead;
                                    continue;
                                }
                            }
                            on_eligible(static_cast<int>(isrc), abs_step, sc, node, obs, J);
                        }
                    }
                }
            }
        }
    };

    std::size_t eligible = 0;
    visit([&](int, int, const Scenario&, const EgoState&, const LeadObservation&, double) {
        ++eligible;
    }, nullptr);

    const double p =
        (budget > 0 && eligible > budget) ? static_cast<double>(budget) / eligible : 1.0;
    std::mt19937_64 rng(seed);
    // Explicit coin flip instead of std::bernoulli_distribution so the kept
    // rows do not depend on the standard-library implementation.
    auto keep = [&rng, p] { return ((rng() >> 11) * 0x1.0p-53) < p; };

    Dataset ds;
    ds.feature_count = aw ? kAwFeatureCount : kAgFeatureCount;
    const std::size_t reserve = (p < 1.0) ? budget + budget / 8 : eligible;
    ds.X.reserve(reserve * ds.feature_count);
    ds.y.reserve(reserve);
    ds.sources.reserve(reserve);

    visit([&](int isrc, int abs_step, const Scenario& sc, const EgoState& node,
              const LeadObservation& obs, double J) {
        if (p < 1.0 && !keep()) return;
        if (aw) {
            FeatureVectorAw f = extract_features_aw(sc.route, node, abs_step, obs);
            ds.X.insert(ds.X.end(), f.begin(), f.end());
        } else {
            FeatureVectorAg f = extract_features_ag(sc.route, node, abs_step);
            ds.X.insert(ds.X.end(), f.begin(), f.end());
        }
        ds.y.push_back(J);
        ds.sources.push_back(SampleSource{isrc, abs_step});
        ++ds.stats.kept;
    }, &ds.stats);

    return ds;
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("dataset: cannot write '" + path + "'");
    const std::vector<std::string> names = feature_names(ds.feature_count == kAwFeatureCount);
    if (static_cast<int>(names.size()) != ds.feature_count) {
        throw ConfigError("dataset: unknown feature count " + std::to_string(ds.feature_count));
    }
    for (const std::string& n : names) out << n << ',';
    out << "label,scenario,step\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* row = ds.row(i);
        for (int k = 0; k < ds.feature_count; ++k) out << fmt_g(row[k], 17) << ',';
        out << fmt_g(ds.y[i], 17) << ',' << ds.sources[i].scenario << ','
            << ds.sources[i].step << '\n';
    }
    if (!out.good()) throw ConfigError("dataset: write failed for '" + path + "'");
}

}  // namespace ecodrive
