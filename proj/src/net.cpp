#include "ecodrive/net.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace ecodrive {

namespace {

double canonical01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

// Library-independent Fisher-Yates so shuffles replay identically everywhere.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::swap(idx[i - 1], idx[rng() % i]);
    }
}

}  // namespace

void TerminalCostNet::validate() const {
    if (layer_sizes.size() < 2) throw ConfigError("net: need at least input and output layers");
    for (int sz : layer_sizes) {
        if (sz <= 0) throw ConfigError("net: layer sizes must be positive");
    }
    if (layer_sizes.back() != 1) throw ConfigError("net: output layer must be scalar");
    const std::size_t L = layer_sizes.size() - 1;
    if (W.size() != L || b.size() != L) throw ConfigError("net: weight count breaks the chain");
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t in = layer_sizes[l], out = layer_sizes[l + 1];
        if (W[l].size() != in * out) throw ConfigError("net: weight matrix shape mismatch");
        if (b[l].size() != out) throw ConfigError("net: bias vector shape mismatch");
        for (double w : W[l]) {
            if (!std::isfinite(w)) throw ConfigError("net: non-finite weight");
        }
        for (double v : b[l]) {
            if (!std::isfinite(v)) throw ConfigError("net: non-finite bias");
        }
    }
    const std::size_t d = layer_sizes.front();
    if (in_mean.size() != d || in_scale.size() != d) {
        throw ConfigError("net: normalizer length differs from the input width");
    }
    for (double s : in_scale) {
        if (!(s > 0.0)) throw ConfigError("net: input scales must be positive");
    }
    if (!(label_scale > 0.0)) throw ConfigError("net: label scale must be positive");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("net: gamma outside [0, 1]");
}

double TerminalCostNet::forward_raw(const double* x) const {
    const std::size_t L = layer_sizes.size() - 1;
    std::vector<double> a(layer_sizes.front());
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = (x[k] - in_mean[k]) / in_scale[k];
    std::vector<double> z;
    for (std::size_t l = 0; l < L; ++l) {
        const int in = layer_sizes[l], out = layer_sizes[l + 1];
        z.assign(out, 0.0);
        for (int o = 0; o < out; ++o) {
            const double* w = W[l].data() + static_cast<std::size_t>(o) * in;
            double acc = b[l][o];
            for (int k = 0; k < in; ++k) acc += w[k] * a[k];
            z[o] = (l + 1 < L) ? std::tanh(acc) : acc;
        }
        a.swap(z);
    }
    return a[0] * label_scale + label_mean;
}

double TerminalCostNet::forward(const double* x) const { return std::max(0.0, forward_raw(x)); }

std::vector<double> TerminalCostNet::input_gradient(const double* x) const {
    const std::size_t L = layer_sizes.size() - 1;
    // Forward, keeping every activation (acts[0] is the normalized input).
    std::vector<std::vector<double>> acts(L + 1);
    acts[0].resize(layer_sizes.front());
    for (std::size_t k = 0; k < acts[0].size(); ++k) {
        acts[0][k] = (x[k] - in_mean[k]) / in_scale[k];
    }
    for (std::size_t l = 0; l < L; ++l) {
        const int in = layer_sizes[l], out = layer_sizes[l + 1];
        acts[l + 1].assign(out, 0.0);
        for (int o = 0; o < out; ++o) {
            const double* w = W[l].data() + static_cast<std::size_t>(o) * in;
            double acc = b[l][o];
            for (int k = 0; k < in; ++k) acc += w[k] * acts[l][k];
            acts[l + 1][o] = (l + 1 < L) ? std::tanh(acc) : acc;
        }
    }
    // Backward from the de-scaled output; delta holds d out / d z at layer l+1.
    std::vector<double> delta{label_scale};
    for (std::size_t l = L; l-- > 0;) {
        const int in = layer_sizes[l], out = layer_sizes[l + 1];
        std::vector<double> prev(in, 0.0);
        for (int o = 0; o < out; ++o) {
            const double dl = delta[o];
            const double* w = W[l].data() + static_cast<std::size_t>(o) * in;
            for (int k = 0; k < in; ++k) prev[k] += dl * w[k];
        }
        if (l > 0) {
            for (int k = 0; k < in; ++k) prev[k] *= 1.0 - acts[l][k] * acts[l][k];
        }
        delta.swap(prev);
    }
    for (std::size_t k = 0; k < delta.size(); ++k) delta[k] /= in_scale[k];
    return delta;
}

TerminalCostNet train_net(const Dataset& ds, const NetConfig& cfg, double gamma,
                          const std::string& corpus_hash, TrainReport* report) {
    const std::size_t n = ds.size();
    const int d = ds.feature_count;
    if (n < 2) throw ConfigError("train: need at least two rows");
    if (d <= 0) throw ConfigError("train: dataset has no features");
    if (!(cfg.val_split > 0.0 && cfg.val_split < 1.0)) {
        throw ConfigError("train: validation split must lie in (0, 1)");
    }
    if (cfg.batch <= 0 || cfg.epochs <= 0) throw ConfigError("train: batch and epochs must be positive");
    if (!(cfg.lr > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
        throw ConfigError("train: momentum outside [0, 1)");
    }
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("train: gamma outside [0, 1]");
    for (int h : cfg.hidden) {
        if (h <= 0) throw ConfigError("train: hidden sizes must be positive");
    }

    std::mt19937_64 rng(cfg.seed);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle_indices(perm, rng);
    std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                                     static_cast<double>(n) * cfg.val_split)));
    if (n_val >= n) n_val = n - 1;
    const std::size_t n_train = n - n_val;

    // z-score statistics from the training split only.
    std::vector<double> mean(d, 0.0), scale(d, 0.0);
    double ymean = 0.0, yscale = 0.0;
    for (std::size_t i = 0; i < n_train; ++i) {
        const double* row = ds.row(perm[i]);
        for (int k = 0; k < d; ++k) mean[k] += row[k];
        ymean += ds.y[perm[i]];
    }
    for (int k = 0; k < d; ++k) mean[k] /= n_train;
    ymean /= n_train;
    for (std::size_t i = 0; i < n_train; ++i) {
        const double* row = ds.row(perm[i]);
        for (int k = 0; k < d; ++k) {
            const double dk = row[k] - mean[k];
            scale[k] += dk * dk;
        }
        const double dy = ds.y[perm[i]] - ymean;
        yscale += dy * dy;
    }
    for (int k = 0; k < d; ++k) {
        scale[k] = std::sqrt(scale[k] / n_train);
        if (scale[k] < 1e-8) scale[k] = 1.0;  // constant feature, maps to 0
    }
    yscale = std::sqrt(yscale / n_train);
    if (yscale < 1e-8) yscale = 1.0;

    // Whole dataset pre-normalized once; rows keep the perm order so the
    // train block is the prefix.
    std::vector<double> Xn(n * static_cast<std::size_t>(d));
    std::vector<double> yn(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = ds.row(perm[i]);
        double* dst = Xn.data() + i * d;
        for (int k = 0; k < d; ++k) dst[k] = (row[k] - mean[k]) / scale[k];
        yn[i] = (ds.y[perm[i]] - ymean) / yscale;
    }

    std::vector<int> sizes;
    sizes.push_back(d);
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(1);
    const std::size_t L = sizes.size() - 1;

    std::vector<std::vector<double>> W(L), b(L), vW(L), vb(L), gW(L), gb(L);
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t in = sizes[l], out = sizes[l + 1];
        W[l].resize(in * out);
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& w : W[l]) w = (2.0 * canonical01(rng) - 1.0) * limit;
        b[l].assign(out, 0.0);
        vW[l].assign(in * out, 0.0);
        vb[l].assign(out, 0.0);
        gW[l].assign(in * out, 0.0);
        gb[l].assign(out, 0.0);
    }

    const std::size_t bmax = static_cast<std::size_t>(cfg.batch);
    std::vector<std::vector<double>> A(L + 1), delta(L + 1);
    for (std::size_t l = 0; l <= L; ++l) {
        A[l].resize(bmax * sizes[l]);
        delta[l].resize(bmax * sizes[l]);
    }

    // rows: indices into Xn/yn. Fills A[0] and runs the affine-tanh chain.
    auto forward_batch = [&](const std::size_t* rows, std::size_t B) {
        for (std::size_t i = 0; i < B; ++i) {
            const double* src = Xn.data() + rows[i] * d;
            std::copy(src, src + d, A[0].data() + i * d);
        }
        for (std::size_t l = 0; l < L; ++l) {
            const int in = sizes[l], out = sizes[l + 1];
            const bool last = (l + 1 == L);
            for (std::size_t i = 0; i < B; ++i) {
                const double* a = A[l].data() + i * in;
                double* z = A[l + 1].data() + i * out;
                for (int o = 0; o < out; ++o) {
                    const double* w = W[l].data() + static_cast<std::size_t>(o) * in;
                    double acc = b[l][o];
                    for (int k = 0; k < in; ++k) acc += w[k] * a[k];
                    z[o] = last ? acc : std::tanh(acc);
                }
            }
        }
    };

    std::vector<std::size_t> train_idx(n_train);
    std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
    std::vector<std::size_t> val_idx(n_val);
    std::iota(val_idx.begin(), val_idx.end(), n_train);

    if (report) {
        *report = TrainReport{};
        report->train_rows = n_train;
        report->val_rows = n_val;
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(train_idx, rng);
        double sq_sum = 0.0;
        for (std::size_t start = 0; start < n_train; start += bmax) {
            const std::size_t B = std::min(bmax, n_train - start);
            forward_batch(train_idx.data() + start, B);

            for (std::size_t i = 0; i < B; ++i) {
                const double err = A[L][i] - yn[train_idx[start + i]];
                sq_sum += err * err;
                delta[L][i] = 2.0 * err / static_cast<double>(B);
            }
            for (std::size_t l = L; l-- > 0;) {
                const int in = sizes[l], out = sizes[l + 1];
                std::fill(gW[l].begin(), gW[l].end(), 0.0);
                std::fill(gb[l].begin(), gb[l].end(), 0.0);
                if (l > 0) {
                    std::fill(delta[l].begin(), delta[l].begin() + B * in, 0.0);
                }
                for (std::size_t i = 0; i < B; ++i) {
                    const double* a = A[l].data() + i * in;
                    const double* dl = delta[l + 1].data() + i * out;
                    double* dprev = delta[l].data() + i * in;
                    for (int o = 0; o < out; ++o) {
                        const double dv = dl[o];
                        if (dv == 0.0) continue;
                        double* gw = gW[l].data() + static_cast<std::size_t>(o) * in;
                        const double* w = W[l].data() + static_cast<std::size_t>(o) * in;
                        for (int k = 0; k < in; ++k) gw[k] += dv * a[k];
                        gb[l][o] += dv;
                        if (l > 0) {
                            for (int k = 0; k < in; ++k) dprev[k] += dv * w[k];
                        }
                    }
                    if (l > 0) {
                        for (int k = 0; k < in; ++k) dprev[k] *= 1.0 - a[k] * a[k];
                    }
                }
                for (std::size_t t = 0; t < W[l].size(); ++t) {
                    vW[l][t] = cfg.momentum * vW[l][t] - cfg.lr * gW[l][t];
                    W[l][t] += vW[l][t];
                }
                for (std::size_t t = 0; t < b[l].size(); ++t) {
                    vb[l][t] = cfg.momentum * vb[l][t] - cfg.lr * gb[l][t];
                    b[l][t] += vb[l][t];
                }
            }
        }
        const double train_mse = sq_sum / static_cast<double>(n_train);

        double val_sq = 0.0;
        for (std::size_t start = 0; start < n_val; start += bmax) {
            const std::size_t B = std::min(bmax, n_val - start);
            forward_batch(val_idx.data() + start, B);
            for (std::size_t i = 0; i < B; ++i) {
                const double err = A[L][i] - yn[val_idx[start + i]];
                val_sq += err * err;
            }
        }
        const double val_mse = val_sq / static_cast<double>(n_val);

        if (!std::isfinite(train_mse) || !std::isfinite(val_mse)) {
            throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1));
        }
        if (report) report->epochs.push_back(EpochStats{train_mse, val_mse});
    }

    TerminalCostNet net;
    net.schema_version = kFeatureSchemaVersion;
    net.layer_sizes = sizes;
    net.W = std::move(W);
    net.b = std::move(b);
    net.in_mean = std::move(mean);
    net.in_scale = std::move(scale);
    net.label_mean = ymean;
    net.label_scale = yscale;
    net.gamma = gamma;
    net.corpus_hash = corpus_hash;
    net.validate();

    if (report) {
        double err_sq = 0.0, label_sq = 0.0;
        for (std::size_t i = 0; i < n_val; ++i) {
            const double y = ds.y[perm[n_train + i]];
            const double pred = net.forward(ds.row(perm[n_train + i]));
            err_sq += (pred - y) * (pred - y);
            label_sq += y * y;
        }
        const double rms = std::sqrt(label_sq / n_val);
        report->holdout_rel_rmse = std::sqrt(err_sq / n_val) / std::max(rms, 1e-12);
    }
    return net;
}

namespace {

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, std::vector<double>& v, std::size_t count) {
    v.resize(count);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
}

}  // namespace

void save_net(const TerminalCostNet& net, const std::string& path) {
    net.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("net: cannot write '" + path + "'");
    out << "ecodrive-net 1\n";
    out << "schema " << net.schema_version << '\n';
    out << "gamma " << fmt_g(net.gamma, 17) << '\n';
    out << "corpus " << (net.corpus_hash.empty() ? "-" : net.corpus_hash) << '\n';
    out << "layers " << net.layer_sizes.size();
    for (int sz : net.layer_sizes) out << ' ' << sz;
    out << "\ndata\n";
    write_doubles(out, net.in_mean);
    write_doubles(out, net.in_scale);
    const std::vector<double> label{net.label_mean, net.label_scale};
    write_doubles(out, label);
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        write_doubles(out, net.W[l]);
        write_doubles(out, net.b[l]);
    }
    if (!out.good()) throw ConfigError("net: write failed for '" + path + "'");
    out.close();

    std::size_t params = 0;
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        params += net.W[l].size() + net.b[l].size();
    }
    nlohmann::json j;
    j["format"] = "ecodrive-net";
    j["version"] = 1;
    j["schema_version"] = net.schema_version;
    j["gamma"] = net.gamma;
    j["corpus_hash"] = net.corpus_hash;
    j["layer_sizes"] = net.layer_sizes;
    j["activation"] = "tanh";
    j["parameter_count"] = params;
    j["input"] = {{"mean", net.in_mean}, {"scale", net.in_scale}};
    j["label"] = {{"mean", net.label_mean}, {"scale", net.label_scale}};
    write_text_file(path + ".json", j.dump(2) + "\n");
}

TerminalCostNet load_net(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("net: cannot read '" + path + "'");
    std::string line;
    auto expect_line = [&](const char* what) -> std::string {
        if (!std::getline(in, line)) {
            throw ConfigError(std::string("net: truncated header, missing ") + what);
        }
        return line;
    };
    if (expect_line("magic") != "ecodrive-net 1") {
        throw ConfigError("net: '" + path + "' is not a net file");
    }

    TerminalCostNet net;
    {
        std::istringstream ss(expect_line("schema"));
        std::string tag;
        if (!(ss >> tag >> net.schema_version) || tag != "schema") {
            throw ConfigError("net: bad schema line");
        }
    }
    {
        std::istringstream ss(expect_line("gamma"));
        std::string tag;
        if (!(ss >> tag >> net.gamma) || tag != "gamma") throw ConfigError("net: bad gamma line");
    }
    {
        std::istringstream ss(expect_line("corpus"));
        std::string tag;
        if (!(ss >> tag >> net.corpus_hash) || tag != "corpus") {
            throw ConfigError("net: bad corpus line");
        }
        if (net.corpus_hash == "-") net.corpus_hash.clear();
    }
    {
        std::istringstream ss(expect_line("layers"));
        std::string tag;
        std::size_t count = 0;
        if (!(ss >> tag >> count) || tag != "layers" || count < 2) {
            throw ConfigError("net: bad layers line");
        }
        net.layer_sizes.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            if (!(ss >> net.layer_sizes[i])) throw ConfigError("net: bad layers line");
        }
    }
    if (expect_line("data marker") != "data") throw ConfigError("net: missing data marker");

    const std::size_t d = net.layer_sizes.front();
    read_doubles(in, net.in_mean, d);
    read_doubles(in, net.in_scale, d);
    std::vector<double> label;
    read_doubles(in, label, 2);
    if (label.size() == 2) {
        net.label_mean = label[0];
        net.label_scale = label[1];
    }
    const std::size_t L = net.layer_sizes.size() - 1;
    net.W.resize(L);
    net.b.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t in_sz = net.layer_sizes[l], out_sz = net.layer_sizes[l + 1];
        read_doubles(in, net.W[l], in_sz * out_sz);
        read_doubles(in, net.b[l], out_sz);
    }
    if (!in.good()) throw ConfigError("net: truncated payload in '" + path + "'");
    net.validate();
    return net;
}

double ensemble_terminal_cost(const TerminalCostNet& ag, const TerminalCostNet& aw,
                              const Route& route, const EgoState& state, int s,
                              const std::optional<LeadObservation>& obs, double horizon_m) {
    if (ag.input_count() != kAgFeatureCount) {
        throw ConfigError("ensemble: ag net expects " + std::to_string(kAgFeatureCount) +
                          " inputs, has " + std::to_string(ag.input_count()));
    }
    if (aw.input_count() != kAwFeatureCount) {
        throw ConfigError("ensemble: aw net expects " + std::to_string(kAwFeatureCount) +
                          " inputs, has " + std::to_string(aw.input_count()));
    }
    if (ag.schema_version != aw.schema_version) {
        throw ConfigError("ensemble: feature schema mismatch between nets");
    }
    if (ag.gamma != aw.gamma) {
        throw ConfigError("ensemble: nets trained for different gammas");
    }
    const bool use_aw =
        obs.has_value() && obs->d_lead_m >= 0.0 && obs->d_lead_m <= horizon_m;
    if (use_aw) {
        const FeatureVectorAw f = extract_features_aw(route, state, s, *obs);
        return aw.forward(f.data());
    }
    const FeatureVectorAg f = extract_features_ag(route, state, s);
    return ag.forward(f.data());
}

}  // namespace ecodrive
