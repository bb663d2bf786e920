#ifndef NFCL_BASELINES_HPP
#define NFCL_BASELINES_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nfcl/backward.hpp"
#include "nfcl/model.hpp"
#include "nfcl/rng.hpp"

namespace nfcl {

/// Channel-shared NLinear: subtract the last lookback value, apply one L->T
/// linear map, add the value back.
struct NLinearModel {
    ModelDims dims;
    std::uint64_t seed = 0;
    std::vector<double> w; // L x T, row-major [j*T + t]
    std::vector<double> b; // T
};

/// Channel-shared DLinear: moving-average trend/remainder split, one linear
/// map per component, outputs summed.
struct DLinearModel {
    ModelDims dims;
    std::uint64_t seed = 0;
    int kernel = 25;
    std::vector<double> trend_w, seasonal_w; // L x T each
    std::vector<double> trend_b, seasonal_b; // T each
};

inline NLinearModel init_nlinear(ModelDims dims, std::uint64_t seed = 0) {
    dims.validate();
    NLinearModel m;
    m.dims = dims;
    m.seed = seed;
    Rng rng(seed, "init");
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims.lookback));
    m.w.resize(static_cast<std::size_t>(dims.lookback) * dims.horizon);
    for (double& v : m.w) v = rng.uniform(-bound, bound);
    m.b.assign(dims.horizon, 0.0);
    return m;
}

inline DLinearModel init_dlinear(ModelDims dims, int kernel = 25, std::uint64_t seed = 0) {
    dims.validate();
    if (kernel < 1) throw std::invalid_argument("dlinear kernel must be >= 1");
    DLinearModel m;
    m.dims = dims;
    m.seed = seed;
    m.kernel = kernel;
    Rng rng(seed, "init");
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims.lookback));
    const std::size_t n = static_cast<std::size_t>(dims.lookback) * dims.horizon;
    m.trend_w.resize(n);
    m.seasonal_w.resize(n);
    for (double& v : m.trend_w) v = rng.uniform(-bound, bound);
    for (double& v : m.seasonal_w) v = rng.uniform(-bound, bound);
    m.trend_b.assign(dims.horizon, 0.0);
    m.seasonal_b.assign(dims.horizon, 0.0);
    return m;
}

inline long long parameter_count(const NLinearModel& m) {
    return static_cast<long long>(m.w.size()) + static_cast<long long>(m.b.size());
}

inline long long parameter_count(const DLinearModel& m) {
    return static_cast<long long>(m.trend_w.size() + m.seasonal_w.size() + m.trend_b.size() +
                                  m.seasonal_b.size());
}

inline std::vector<ParamRef> param_refs(NLinearModel& m) {
    return {{"w", m.w.data(), m.w.size(), true, 0.0}, {"b", m.b.data(), m.b.size(), false, 0.0}};
}

inline std::vector<ParamRef> param_refs(DLinearModel& m) {
    return {{"trend.w", m.trend_w.data(), m.trend_w.size(), true, 0.0},
            {"trend.b", m.trend_b.data(), m.trend_b.size(), false, 0.0},
            {"seasonal.w", m.seasonal_w.data(), m.seasonal_w.size(), true, 0.0},
            {"seasonal.b", m.seasonal_b.data(), m.seasonal_b.size(), false, 0.0}};
}

/// Moving average over the time axis with replicate padding on both sides,
/// output length equals input length. One row of length L.
inline void moving_average_row(const double* x, int length, int kernel, double* out) {
    const int pad_front = (kernel - 1) / 2;
    std::vector<double> padded(static_cast<std::size_t>(length) + kernel - 1);
    for (int j = 0; j < pad_front; ++j) padded[j] = x[0];
    for (int j = 0; j < length; ++j) padded[pad_front + j] = x[j];
    for (int j = pad_front + length; j < static_cast<int>(padded.size()); ++j)
        padded[j] = x[length - 1];
    for (int j = 0; j < length; ++j) {
        double sum = 0.0;
        for (int u = 0; u < kernel; ++u) sum += padded[j + u];
        out[j] = sum / kernel;
    }
}

inline std::vector<double> predict(const NLinearModel& m, const std::vector<double>& x, int batch) {
    const int K = m.dims.series, L = m.dims.lookback, T = m.dims.horizon;
    if (static_cast<std::size_t>(batch) * K * L != x.size())
        throw std::invalid_argument("nlinear: input shape mismatch");
    std::vector<double> y(static_cast<std::size_t>(batch) * K * T);
    for (int b = 0; b < batch; ++b)
        for (int k = 0; k < K; ++k) {
            const double* row = x.data() + (static_cast<std::size_t>(b) * K + k) * L;
            double* out = y.data() + (static_cast<std::size_t>(b) * K + k) * T;
            const double last = row[L - 1];
            for (int t = 0; t < T; ++t) out[t] = m.b[t] + last;
            for (int j = 0; j < L; ++j) {
                const double v = row[j] - last;
                const double* wrow = m.w.data() + static_cast<std::size_t>(j) * T;
                for (int t = 0; t < T; ++t) out[t] += v * wrow[t];
            }
        }
    return y;
}

inline std::vector<double> predict(const DLinearModel& m, const std::vector<double>& x, int batch) {
    const int K = m.dims.series, L = m.dims.lookback, T = m.dims.horizon;
    if (static_cast<std::size_t>(batch) * K * L != x.size())
        throw std::invalid_argument("dlinear: input shape mismatch");
    std::vector<double> y(static_cast<std::size_t>(batch) * K * T);
    std::vector<double> trend(L);
    for (int b = 0; b < batch; ++b)
        for (int k = 0; k < K; ++k) {
            const double* row = x.data() + (static_cast<std::size_t>(b) * K + k) * L;
            double* out = y.data() + (static_cast<std::size_t>(b) * K + k) * T;
            moving_average_row(row, L, m.kernel, trend.data());
            for (int t = 0; t < T; ++t) out[t] = m.trend_b[t] + m.seasonal_b[t];
            for (int j = 0; j < L; ++j) {
                const double tv = trend[j];
                const double sv = row[j] - trend[j];
                const double* wt = m.trend_w.data() + static_cast<std::size_t>(j) * T;
                const double* ws = m.seasonal_w.data() + static_cast<std::size_t>(j) * T;
                for (int t = 0; t < T; ++t) out[t] += tv * wt[t] + sv * ws[t];
            }
        }
    return y;
}

inline GradientSet backward(const NLinearModel& m, const std::vector<double>& x,
                            const std::vector<double>& y_true, int batch, int /*threads*/ = 1) {
    const int K = m.dims.series, L = m.dims.lookback, T = m.dims.horizon;
    GradientSet gs = make_gradient_set(m);
    std::vector<double> y = predict(m, x, batch);
    const double inv_total = 1.0 / (static_cast<double>(batch) * K * T);
    for (int b = 0; b < batch; ++b)
        for (int k = 0; k < K; ++k) {
            const double* row = x.data() + (static_cast<std::size_t>(b) * K + k) * L;
            const std::size_t base = (static_cast<std::size_t>(b) * K + k) * T;
            const double last = row[L - 1];
            for (int t = 0; t < T; ++t) {
                const double diff = y[base + t] - y_true[base + t];
                gs.loss += diff * diff;
                const double r = 2.0 * diff * inv_total;
                gs.slots[1][t] += r;
                for (int j = 0; j < L; ++j)
                    gs.slots[0][static_cast<std::size_t>(j) * T + t] += (row[j] - last) * r;
            }
        }
    gs.loss *= inv_total;
    if (!std::isfinite(gs.loss)) throw DivergedError("backward: non-finite loss");
    return gs;
}

inline GradientSet backward(const DLinearModel& m, const std::vector<double>& x,
                            const std::vector<double>& y_true, int batch, int /*threads*/ = 1) {
    const int K = m.dims.series, L = m.dims.lookback, T = m.dims.horizon;
    GradientSet gs = make_gradient_set(m);
    std::vector<double> y = predict(m, x, batch);
    const double inv_total = 1.0 / (static_cast<double>(batch) * K * T);
    std::vector<double> trend(L);
    for (int b = 0; b < batch; ++b)
        for (int k = 0; k < K; ++k) {
            const double* row = x.data() + (static_cast<std::size_t>(b) * K + k) * L;
            const std::size_t base = (static_cast<std::size_t>(b) * K + k) * T;
            moving_average_row(row, L, m.kernel, trend.data());
            for (int t = 0; t < T; ++t) {
                const double diff = y[base + t] - y_true[base + t];
                gs.loss += diff * diff;
                const double r = 2.0 * diff * inv_total;
                gs.slots[1][t] += r;
                gs.slots[3][t] += r;
                for (int j = 0; j < L; ++j) {
                    gs.slots[0][static_cast<std::size_t>(j) * T + t] += trend[j] * r;
                    gs.slots[2][static_cast<std::size_t>(j) * T + t] += (row[j] - trend[j]) * r;
                }
            }
        }
    gs.loss *= inv_total;
    if (!std::isfinite(gs.loss)) throw DivergedError("backward: non-finite loss");
    return gs;
}

} // namespace nfcl

#endif // NFCL_BASELINES_HPP
