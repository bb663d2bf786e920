#ifndef NFCL_BACKWARD_HPP
#define NFCL_BACKWARD_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <thread>
#include <vector>

#include "nfcl/forward.hpp"
#include "nfcl/model.hpp"

namespace nfcl {

/// Raised when a loss or gradient turns non-finite; the training loop
/// reports the run as diverged instead of crashing.
struct DivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Gradients of the batch MSE w.r.t. every parameter, slot-aligned with
/// param_refs() of the model that produced it.
struct GradientSet {
    std::vector<std::vector<double>> slots;
    double loss = 0.0;

    void add(const GradientSet& other) {
        for (std::size_t i = 0; i < slots.size(); ++i)
            for (std::size_t j = 0; j < slots[i].size(); ++j) slots[i][j] += other.slots[i][j];
        loss += other.loss;
    }
};

template <typename ModelT>
GradientSet make_gradient_set(const ModelT& m) {
    // param_refs takes a mutable model; only names and sizes are read here.
    std::vector<ParamRef> refs = param_refs(const_cast<ModelT&>(m));
    GradientSet gs;
    gs.slots.reserve(refs.size());
    for (const auto& r : refs) gs.slots.emplace_back(r.size, 0.0);
    return gs;
}

namespace detail {

// Slot order per core: alpha, beta, [h<l>.w, h<l>.b ...], out.w, out.b.
inline int slots_per_core(const CoreModel& core) {
    return 4 + (core.has_mapping ? 2 * static_cast<int>(core.mapping.banks.size()) : 0);
}

/// Accumulates gradients for `count` samples starting at x/y_true; adds raw
/// squared error into gs.loss. inv_total is 1/(total batch * K * T).
inline void backward_chunk_nfcl(const NfclModel& m, const double* x, const double* y_true,
                                int count, double inv_total, GradientSet& gs) {
    const int K = m.dims.series, L = m.dims.lookback, T = m.dims.horizon;
    const int P = m.dims.input_points(), Q = m.dims.output_points();

    std::vector<double> xv(x, x + static_cast<std::size_t>(count) * P);
    ForwardCache cache;
    std::vector<double> y = forward(m, xv, count, &cache);

    // d(loss)/d(y_z) per element; sse for the report.
    std::vector<double> gz(y.size());
    for (int b = 0; b < count; ++b)
        for (int k = 0; k < K; ++k) {
            const double sd = cache.stats.stdev_at(b, k);
            const std::size_t base = (static_cast<std::size_t>(b) * K + k) * T;
            for (int t = 0; t < T; ++t) {
                const double diff = y[base + t] - y_true[base + t];
                gs.loss += diff * diff;
                gz[base + t] = 2.0 * diff * inv_total * sd;
            }
        }

    std::vector<double> gyt(Q), du(P), dxt(P);
    std::vector<double> delta, delta_prev;

    int slot_base = 0;
    for (std::size_t c = 0; c < m.cores.size(); ++c) {
        const CoreModel& core = m.cores[c];
        const CoreCache& cc = cache.cores[c];
        const std::vector<double>& comp =
            m.variant == Variant::decomposed ? cache.components[c] : cache.zscore;
        const int n_banks = core.has_mapping ? static_cast<int>(core.mapping.banks.size()) : 0;
        std::vector<double>& d_alpha = gs.slots[slot_base + 0];
        std::vector<double>& d_beta = gs.slots[slot_base + 1];
        std::vector<double>& d_outw = gs.slots[slot_base + 2 + 2 * n_banks];
        std::vector<double>& d_outb = gs.slots[slot_base + 3 + 2 * n_banks];

        for (int b = 0; b < count; ++b) {
            const double* yt = cc.linear.data() + static_cast<std::size_t>(b) * Q;
            const double* u = cc.mapped.data() + static_cast<std::size_t>(b) * P;
            const double* xt = cc.x_tilde.data() + static_cast<std::size_t>(b) * P;
            const double* cmp = comp.data() + static_cast<std::size_t>(b) * P;
            const double* g = gz.data() + static_cast<std::size_t>(b) * Q;

            // Inverse affine on this core's output: contribution (yt-beta)/alpha.
            for (int k = 0; k < K; ++k) {
                const double a = core.norm.alpha[k];
                const double beta = core.norm.beta[k];
                double ga = 0.0, gb = 0.0;
                for (int t = 0; t < T; ++t) {
                    const int q = k * T + t;
                    gyt[q] = g[q] / a;
                    ga -= g[q] * (yt[q] - beta) / (a * a);
                    gb -= g[q] / a;
                }
                d_alpha[k] += ga;
                d_beta[k] += gb;
            }

            // Dense layer.
            for (int q = 0; q < Q; ++q) d_outb[q] += gyt[q];
            for (int p = 0; p < P; ++p) {
                const double* wrow = core.out.w.data() + static_cast<std::size_t>(p) * Q;
                double* gw = d_outw.data() + static_cast<std::size_t>(p) * Q;
                double acc = 0.0;
                const double up = u[p];
                for (int q = 0; q < Q; ++q) {
                    gw[q] += up * gyt[q];
                    acc += wrow[q] * gyt[q];
                }
                du[p] = acc;
            }

            // Point networks.
            if (core.has_mapping) {
                const MappingStack& st = core.mapping;
                for (int p = 0; p < P; ++p) {
                    delta.assign(1, du[p]);
                    for (int l = n_banks - 1; l >= 0; --l) {
                        const auto& bank = st.banks[l];
                        const bool last = l == n_banks - 1;
                        const double* in_row =
                            l == 0 ? xt + p
                                   : cc.map.acts[l - 1].data() +
                                         (static_cast<std::size_t>(b) * P + p) * bank.in;
                        const double* post =
                            last ? nullptr
                                 : cc.map.acts[l].data() +
                                       (static_cast<std::size_t>(b) * P + p) * bank.out;
                        double* gw = gs.slots[slot_base + 2 + 2 * l].data() +
                                     static_cast<std::size_t>(p) * bank.out * bank.in;
                        double* gb = gs.slots[slot_base + 3 + 2 * l].data() +
                                     static_cast<std::size_t>(p) * bank.out;
                        const double* wp =
                            bank.w.data() + static_cast<std::size_t>(p) * bank.out * bank.in;

                        delta_prev.assign(bank.in, 0.0);
                        for (int o = 0; o < bank.out; ++o) {
                            double d = delta[o];
                            if (!last) d *= post[o] > 0.0 ? 1.0 : st.leaky_slope;
                            gb[o] += d;
                            const double* wrow = wp + static_cast<std::size_t>(o) * bank.in;
                            double* gwrow = gw + static_cast<std::size_t>(o) * bank.in;
                            for (int i = 0; i < bank.in; ++i) {
                                gwrow[i] += d * in_row[i];
                                delta_prev[i] += wrow[i] * d;
                            }
                        }
                        delta = delta_prev;
                    }
                    dxt[p] = delta[0];
                }
            } else {
                for (int p = 0; p < P; ++p) dxt[p] = du[p];
            }

            // Affine on this core's input: xt = alpha * comp + beta.
            for (int k = 0; k < K; ++k) {
                double ga = 0.0, gb = 0.0;
                for (int j = 0; j < L; ++j) {
                    const int p = k * L + j;
                    ga += cmp[p] * dxt[p];
                    gb += dxt[p];
                }
                d_alpha[k] += ga;
                d_beta[k] += gb;
            }
        }
        slot_base += 4 + 2 * n_banks;
    }
}

} // namespace detail

/// Analytic gradients of the batch MSE (over all B*K*T elements) w.r.t.
/// every parameter. With threads > 1 samples are split into contiguous
/// chunks joined in chunk order, so results do not depend on scheduling.
inline GradientSet backward(const NfclModel& m, const std::vector<double>& x,
                            const std::vector<double>& y_true, int batch, int threads = 1) {
    const int P = m.dims.input_points(), Q = m.dims.output_points();
    if (static_cast<std::size_t>(batch) * P != x.size() ||
        static_cast<std::size_t>(batch) * Q != y_true.size())
        throw std::invalid_argument("backward: shape mismatch");

    const double inv_total = 1.0 / (static_cast<double>(batch) * Q);
    GradientSet gs = make_gradient_set(m);

    threads = std::max(1, std::min(threads, batch));
    if (threads == 1) {
        detail::backward_chunk_nfcl(m, x.data(), y_true.data(), batch, inv_total, gs);
    } else {
        std::vector<GradientSet> parts(threads);
        std::vector<std::thread> pool;
        const int chunk = (batch + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int lo = t * chunk;
            const int hi = std::min(batch, lo + chunk);
            parts[t] = make_gradient_set(m);
            if (lo >= hi) continue;
            pool.emplace_back([&, t, lo, hi] {
                detail::backward_chunk_nfcl(m, x.data() + static_cast<std::size_t>(lo) * P,
                                            y_true.data() + static_cast<std::size_t>(lo) * Q,
                                            hi - lo, inv_total, parts[t]);
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& part : parts) gs.add(part);
    }
    gs.loss *= inv_total;
    if (!std::isfinite(gs.loss)) throw DivergedError("backward: non-finite loss");
    return gs;
}

} // namespace nfcl

#endif // NFCL_BACKWARD_HPP
