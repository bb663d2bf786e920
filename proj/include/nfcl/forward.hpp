#ifndef NFCL_FORWARD_HPP
#define NFCL_FORWARD_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "nfcl/model.hpp"

namespace nfcl {

/// Mean and population std of each sample's lookback window, one pair per
/// (sample, variable). std is floored at 1e-5 so constant windows normalize
/// to zero instead of dividing by zero.
inline NormStats compute_window_stats(const std::vector<double>& x, int batch, int series,
                                      int lookback) {
    NormStats st;
    st.count = batch;
    st.series = series;
    st.mean.resize(static_cast<std::size_t>(batch) * series);
    st.stdev.resize(static_cast<std::size_t>(batch) * series);
    for (int b = 0; b < batch; ++b) {
        for (int k = 0; k < series; ++k) {
            const double* row = x.data() + (static_cast<std::size_t>(b) * series + k) * lookback;
            double sum = 0.0;
            for (int j = 0; j < lookback; ++j) sum += row[j];
            const double mean = sum / lookback;
            double ss = 0.0;
            for (int j = 0; j < lookback; ++j) {
                const double d = row[j] - mean;
                ss += d * d;
            }
            st.mean[static_cast<std::size_t>(b) * series + k] = mean;
            st.stdev[static_cast<std::size_t>(b) * series + k] =
                std::max(std::sqrt(ss / lookback), 1e-5);
        }
    }
    return st;
}

/// x_tilde = alpha * (x - mean) / std + beta, per sample and variable.
inline std::vector<double> instance_normalize(const std::vector<double>& x, int batch, int series,
                                              int lookback, const NormParams& p, NormStats& stats_out) {
    stats_out = compute_window_stats(x, batch, series, lookback);
    std::vector<double> out(x.size());
    for (int b = 0; b < batch; ++b) {
        for (int k = 0; k < series; ++k) {
            const double mean = stats_out.mean_at(b, k);
            const double sd = stats_out.stdev_at(b, k);
            const double a = p.alpha[k];
            const double beta = p.beta[k];
            const std::size_t base = (static_cast<std::size_t>(b) * series + k) * lookback;
            for (int j = 0; j < lookback; ++j)
                out[base + j] = a * ((x[base + j] - mean) / sd) + beta;
        }
    }
    return out;
}

/// Exact inverse of the affine map, reusing the lookback statistics:
/// y = ((y_tilde - beta) / alpha) * std + mean.
inline std::vector<double> instance_denormalize(const std::vector<double>& y_tilde, int batch,
                                                int series, int horizon, const NormParams& p,
                                                const NormStats& stats) {
    std::vector<double> out(y_tilde.size());
    for (int b = 0; b < batch; ++b) {
        for (int k = 0; k < series; ++k) {
            const double mean = stats.mean_at(b, k);
            const double sd = stats.stdev_at(b, k);
            const double a = p.alpha[k];
            const double beta = p.beta[k];
            const std::size_t base = (static_cast<std::size_t>(b) * series + k) * horizon;
            for (int t = 0; t < horizon; ++t)
                out[base + t] = ((y_tilde[base + t] - beta) / a) * sd + mean;
        }
    }
    return out;
}

/// Dense layer over the flattened window: y[q] = sum_p x[p] * w[p,q] + b[q].
inline std::vector<double> forward_linear(const std::vector<double>& x, int batch,
                                          const OutputLayer& layer) {
    if (static_cast<std::size_t>(batch) * layer.inputs != x.size())
        throw std::invalid_argument("forward_linear: shape mismatch");
    std::vector<double> y(static_cast<std::size_t>(batch) * layer.outputs);
    for (int b = 0; b < batch; ++b) {
        const double* xin = x.data() + static_cast<std::size_t>(b) * layer.inputs;
        double* yout = y.data() + static_cast<std::size_t>(b) * layer.outputs;
        for (int q = 0; q < layer.outputs; ++q) yout[q] = layer.b[q];
        for (int p = 0; p < layer.inputs; ++p) {
            const double xv = xin[p];
            const double* wrow = layer.w.data() + static_cast<std::size_t>(p) * layer.outputs;
            for (int q = 0; q < layer.outputs; ++q) yout[q] += xv * wrow[q];
        }
    }
    return y;
}

inline double leaky_relu(double v, double slope) { return v > 0.0 ? v : slope * v; }

/// Post-activation values of every hidden bank, kept for backprop.
struct MapCache {
    std::vector<std::vector<double>> acts; // one per hidden bank: batch * points * out
};

/// Grouped evaluation of the per-point networks: one bank at a time across
/// all points and samples. Accumulation order per neuron matches the
/// double-loop reference exactly, so results are bit-identical.
inline std::vector<double> map_points(const std::vector<double>& x, int batch,
                                      const MappingStack& st, MapCache* cache = nullptr) {
    const int pts = st.points;
    if (static_cast<std::size_t>(batch) * pts != x.size())
        throw std::invalid_argument("map_points: shape mismatch");
    if (cache) cache->acts.assign(st.banks.size() - 1, {});

    std::vector<double> cur = x; // batch * points * in, in=1 for the first bank
    for (std::size_t l = 0; l < st.banks.size(); ++l) {
        const auto& bank = st.banks[l];
        const bool last = l + 1 == st.banks.size();
        std::vector<double> next(static_cast<std::size_t>(batch) * pts * bank.out);
        for (int b = 0; b < batch; ++b) {
            for (int p = 0; p < pts; ++p) {
                const double* in = cur.data() + (static_cast<std::size_t>(b) * pts + p) * bank.in;
                double* out = next.data() + (static_cast<std::size_t>(b) * pts + p) * bank.out;
                const double* wp = bank.w.data() + static_cast<std::size_t>(p) * bank.out * bank.in;
                const double* bp = bank.b.data() + static_cast<std::size_t>(p) * bank.out;
                for (int o = 0; o < bank.out; ++o) {
                    double acc = bp[o];
                    const double* wrow = wp + static_cast<std::size_t>(o) * bank.in;
                    for (int i = 0; i < bank.in; ++i) acc += wrow[i] * in[i];
                    out[o] = last ? acc : leaky_relu(acc, st.leaky_slope);
                }
            }
        }
        if (cache && !last) cache->acts[l] = next;
        cur = std::move(next);
    }
    return cur;
}

/// Double-loop reference: walks one sample and one point at a time through
/// its whole scalar network. Oracle for the grouped path.
inline std::vector<double> map_points_reference(const std::vector<double>& x, int batch,
                                                const MappingStack& st) {
    const int pts = st.points;
    if (static_cast<std::size_t>(batch) * pts != x.size())
        throw std::invalid_argument("map_points_reference: shape mismatch");
    std::vector<double> out(x.size());
    std::vector<double> buf_a, buf_b;
    for (int b = 0; b < batch; ++b) {
        for (int p = 0; p < pts; ++p) {
            buf_a.assign(1, x[static_cast<std::size_t>(b) * pts + p]);
            for (std::size_t l = 0; l < st.banks.size(); ++l) {
                const auto& bank = st.banks[l];
                const bool last = l + 1 == st.banks.size();
                buf_b.assign(bank.out, 0.0);
                const double* wp = bank.w.data() + static_cast<std::size_t>(p) * bank.out * bank.in;
                const double* bp = bank.b.data() + static_cast<std::size_t>(p) * bank.out;
                for (int o = 0; o < bank.out; ++o) {
                    double acc = bp[o];
                    const double* wrow = wp + static_cast<std::size_t>(o) * bank.in;
                    for (int i = 0; i < bank.in; ++i) acc += wrow[i] * buf_a[i];
                    buf_b[o] = last ? acc : leaky_relu(acc, st.leaky_slope);
                }
                std::swap(buf_a, buf_b);
            }
            out[static_cast<std::size_t>(b) * pts + p] = buf_a[0];
        }
    }
    return out;
}

/// Re-evaluates each point through its own network, then the dense layer.
inline std::vector<double> forward_mapped(const std::vector<double>& x_tilde, int batch,
                                          const CoreModel& core, MapCache* cache = nullptr) {
    if (!core.has_mapping) return forward_linear(x_tilde, batch, core.out);
    std::vector<double> mapped = map_points(x_tilde, batch, core.mapping, cache);
    return forward_linear(mapped, batch, core.out);
}

/// Moving-average decomposition: for each kernel (largest first) the running
/// residual is left-padded, average-pooled at stride 1, the pooled series is
/// emitted and subtracted. The final kernel is 1, so components sum back to
/// the input.
inline std::vector<std::vector<double>> decompose(const std::vector<double>& x, int batch,
                                                  int series, int lookback, const DecompSpec& spec) {
    spec.validate();
    std::vector<std::vector<double>> components;
    components.reserve(spec.kernels.size());
    std::vector<double> residual = x;
    std::vector<double> padded;
    for (int kernel : spec.kernels) {
        std::vector<double> comp(x.size());
        for (int b = 0; b < batch; ++b) {
            for (int k = 0; k < series; ++k) {
                const std::size_t base = (static_cast<std::size_t>(b) * series + k) * lookback;
                padded.assign(static_cast<std::size_t>(lookback) + kernel - 1, 0.0);
                const double first = residual[base];
                for (int j = 0; j < kernel - 1; ++j)
                    padded[j] = spec.padding == PadMode::replicate ? first : 0.0;
                for (int j = 0; j < lookback; ++j) padded[kernel - 1 + j] = residual[base + j];
                for (int j = 0; j < lookback; ++j) {
                    double sum = 0.0;
                    for (int u = 0; u < kernel; ++u) sum += padded[j + u];
                    comp[base + j] = sum / kernel;
                }
            }
        }
        for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= comp[i];
        components.push_back(std::move(comp));
    }
    return components;
}

struct CoreCache {
    std::vector<double> x_tilde; // batch * K*L, affine-normalized input to this core
    MapCache map;
    std::vector<double> mapped; // batch * K*L, output of the point networks
    std::vector<double> linear; // batch * K*T, dense-layer output
};

struct ForwardCache {
    NormStats stats;
    std::vector<double> zscore;                  // batch * K*L
    std::vector<std::vector<double>> components; // per core (decomposed only)
    std::vector<CoreCache> cores;
    std::vector<double> y_norm; // normalized-space prediction
    std::vector<double> y;      // final prediction, original units of x
};

namespace detail {

inline void apply_core_affine(const std::vector<double>& comp, int batch, int series, int lookback,
                              const NormParams& p, std::vector<double>& out) {
    out.resize(comp.size());
    for (int b = 0; b < batch; ++b)
        for (int k = 0; k < series; ++k) {
            const double a = p.alpha[k];
            const double beta = p.beta[k];
            const std::size_t base = (static_cast<std::size_t>(b) * series + k) * lookback;
            for (int j = 0; j < lookback; ++j) out[base + j] = a * comp[base + j] + beta;
        }
}

} // namespace detail

/// Full pipeline: window standardization, per-core affine + forecaster,
/// inverse affine, sum across cores, statistics recovery.
///
/// For the decomposed variant the standardized input is decomposed and each
/// component gets its own core; every core's affine is inverted on its own
/// output before the sum, so the learnable normalization stays exactly
/// invertible per component.
inline std::vector<double> forward(const NfclModel& m, const std::vector<double>& x, int batch,
                                   ForwardCache* cache = nullptr) {
    const int K = m.dims.series, L = m.dims.lookback, T = m.dims.horizon;
    if (static_cast<std::size_t>(batch) * K * L != x.size())
        throw std::invalid_argument("forward: input shape mismatch");

    NormStats stats = compute_window_stats(x, batch, K, L);
    std::vector<double> z(x.size());
    for (int b = 0; b < batch; ++b)
        for (int k = 0; k < K; ++k) {
            const double mean = stats.mean_at(b, k);
            const double sd = stats.stdev_at(b, k);
            const std::size_t base = (static_cast<std::size_t>(b) * K + k) * L;
            for (int j = 0; j < L; ++j) z[base + j] = (x[base + j] - mean) / sd;
        }

    std::vector<std::vector<double>> components;
    if (m.variant == Variant::decomposed)
        components = decompose(z, batch, K, L, m.decomp);

    const std::size_t out_elems = static_cast<std::size_t>(batch) * K * T;
    std::vector<double> y_z(out_elems, 0.0);
    if (cache) {
        cache->stats = stats;
        cache->zscore = z;
        cache->cores.assign(m.cores.size(), {});
    }

    std::vector<double> x_tilde;
    std::vector<double> raw_sum(out_elems, 0.0); // sum of dense-layer outputs
    for (std::size_t c = 0; c < m.cores.size(); ++c) {
        const CoreModel& core = m.cores[c];
        const std::vector<double>& comp = m.variant == Variant::decomposed ? components[c] : z;
        detail::apply_core_affine(comp, batch, K, L, core.norm, x_tilde);

        MapCache* mc = cache ? &cache->cores[c].map : nullptr;
        std::vector<double> mapped =
            core.has_mapping ? map_points(x_tilde, batch, core.mapping, mc) : x_tilde;
        std::vector<double> yt = forward_linear(mapped, batch, core.out);

        for (int b = 0; b < batch; ++b)
            for (int k = 0; k < K; ++k) {
                const double a = core.norm.alpha[k];
                const double beta = core.norm.beta[k];
                const std::size_t base = (static_cast<std::size_t>(b) * K + k) * T;
                for (int t = 0; t < T; ++t) {
                    raw_sum[base + t] += yt[base + t];
                    y_z[base + t] += (yt[base + t] - beta) / a;
                }
            }
        if (cache) {
            cache->cores[c].x_tilde = x_tilde;
            cache->cores[c].mapped = std::move(mapped);
            cache->cores[c].linear = std::move(yt);
        }
    }

    std::vector<double> y(out_elems);
    for (int b = 0; b < batch; ++b)
        for (int k = 0; k < K; ++k) {
            const double mean = stats.mean_at(b, k);
            const double sd = stats.stdev_at(b, k);
            const std::size_t base = (static_cast<std::size_t>(b) * K + k) * T;
            for (int t = 0; t < T; ++t) y[base + t] = y_z[base + t] * sd + mean;
        }

    if (cache) {
        cache->components = std::move(components);
        // Normalized-space prediction: the dense-layer output for v/c, the
        // z-space sum for the decomposed ensemble.
        cache->y_norm = m.variant == Variant::decomposed ? y_z : raw_sum;
        cache->y = y;
    }
    return y;
}

inline std::vector<double> predict(const NfclModel& m, const std::vector<double>& x, int batch) {
    return forward(m, x, batch);
}

} // namespace nfcl

#endif // NFCL_FORWARD_HPP
