#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ecodrive/grid.hpp"
#include "ecodrive/world.hpp"

namespace ecodrive {

inline constexpr int kAgFeatureCount = 13;
inline constexpr int kAwFeatureCount = 16;
inline constexpr int kFeatureSchemaVersion = 1;

// Cap / sentinel for the gap-closure time when the ego never catches the lead.
inline constexpr double kTimeToLeadMax = 600.0;

// Lead gaps sampled into aw datasets; matches the lookahead plus the proxy
// projection span used by the controller.
inline constexpr double kLeadSampleWindowM = 400.0;

struct LeadObservation {
    double d_lead_m = 0.0;
    double v_lead_mps = 0.0;
};

// Layout (aw appends the last three):
//  [0] soc                [1] v                 [2] v - current base limit
//  [3] v - next limit     [4] dist to next light [5] dist to next limit change
//  [6] dist remaining     [7..12] next-light phase at t + {0,5,10,15,20,25} s
//                                 (green +1, red -1; all +1 when no light ahead)
//  [13] lead gap          [14] closing speed (ego - lead)   [15] gap-closure time
using FeatureVectorAg = std::array<double, kAgFeatureCount>;
using FeatureVectorAw = std::array<double, kAwFeatureCount>;

std::vector<std::string> feature_names(bool aw);

// s is the absolute route step (x = s * ds). Total on valid steps: absent
// lights and limit changes fall back to the remaining-distance sentinels.
FeatureVectorAg extract_features_ag(const Route& route, const EgoState& state, int s);
FeatureVectorAw extract_features_aw(const Route& route, const EgoState& state, int s,
                                    const LeadObservation& obs);

struct SampleSource {
    int scenario = 0;
    int step = 0;  // absolute route step
};

struct DatasetStats {
    std::size_t nodes_seen = 0;  // grid nodes scanned across all sources
    std::size_t skipped_nonfinite = 0;
    std::size_t skipped_negative = 0;
    std::size_t skipped_no_lead = 0;  // aw only: gap outside the sampling window
    std::size_t kept = 0;
};

struct Dataset {
    int feature_count = 0;
    std::vector<double> X;  // row-major size() x feature_count
    std::vector<double> y;
    std::vector<SampleSource> sources;
    DatasetStats stats;

    std::size_t size() const { return y.size(); }
    const double* row(std::size_t i) const {
        return X.data() + i * static_cast<std::size_t>(feature_count);
    }
};

struct DatasetSource {
    const Scenario* scenario = nullptr;
    const ValueFunction* vf = nullptr;
};

// Labels every finite-cost grid node with its stored cost-to-go. budget > 0
// thins the rows to roughly that many by a seeded Bernoulli pass over a fixed
// scan order; 0 keeps everything. The aw variant requires a lead in every
// source scenario and keeps only nodes whose gap at the node's own time lies
// in [0, kLeadSampleWindowM].
Dataset build_dataset(const std::vector<DatasetSource>& sources, bool aw,
                      std::size_t budget, std::uint64_t seed);

// Schema header row, then one row per sample with full-precision values.
void save_dataset_csv(const Dataset& ds, const std::string& path);

}  // namespace ecodrive
