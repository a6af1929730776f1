#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ecodrive/features.hpp"

namespace ecodrive {

struct NetConfig {
    std::vector<int> hidden = {64, 64};
    double lr = 0.01;
    double momentum = 0.9;
    int batch = 256;
    int epochs = 200;
    double val_split = 0.2;
    std::uint64_t seed = 1;
};

// Feed-forward tanh net mapping a feature vector to a cost-to-go estimate.
// Weights act on z-scored inputs; the scalar output is de-scaled back to cost
// units. forward() clamps at zero, forward_raw() does not (gradient checks
// need the smooth chain).
struct TerminalCostNet {
    int schema_version = kFeatureSchemaVersion;
    std::vector<int> layer_sizes;        // input, hidden..., 1
    std::vector<std::vector<double>> W;  // one per layer, row-major out x in
    std::vector<std::vector<double>> b;
    std::vector<double> in_mean;
    std::vector<double> in_scale;
    double label_mean = 0.0;
    double label_scale = 1.0;
    double gamma = 0.65;
    std::string corpus_hash;

    int input_count() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
    void validate() const;

    double forward_raw(const double* x) const;
    double forward(const double* x) const;
    // d forward_raw / d x_i, including the input-normalization chain.
    std::vector<double> input_gradient(const double* x) const;
};

struct EpochStats {
    double train_mse = 0.0;  // normalized-label space
    double val_mse = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double holdout_rel_rmse = 0.0;  // de-scaled RMSE over the RMS of held-out labels
    std::size_t train_rows = 0;
    std::size_t val_rows = 0;
};

// Mini-batch SGD with momentum on the mean squared error of normalized
// labels. Deterministic under cfg.seed. Non-finite loss raises TrainingError
// naming the epoch.
TerminalCostNet train_net(const Dataset& ds, const NetConfig& cfg, double gamma,
                          const std::string& corpus_hash, TrainReport* report = nullptr);

// Binary container plus a human-readable JSON sidecar at path + ".json".
void save_net(const TerminalCostNet& net, const std::string& path);
TerminalCostNet load_net(const std::string& path);

// Lead observed within horizon_m of the ego -> aw net on aw features, else ag
// net on ag features (the boundary gap counts as observed). The two nets must
// share schema and gamma.
double ensemble_terminal_cost(const TerminalCostNet& ag, const TerminalCostNet& aw,
                              const Route& route, const EgoState& state, int s,
                              const std::optional<LeadObservation>& obs,
                              double horizon_m = 200.0);

}  // namespace ecodrive
