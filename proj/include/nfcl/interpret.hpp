#ifndef NFCL_INTERPRET_HPP
#define NFCL_INTERPRET_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfcl/forward.hpp"
#include "nfcl/model.hpp"

namespace nfcl {

/// Additive explanation of one predicted point (k, t): a K x L matrix of
/// per-input contributions plus the bias term. In normalized space the sum
/// of all entries and the bias reproduces the prediction exactly.
struct ContributionMap {
    int target_series = 0;
    int target_step = 0;
    int series = 0;
    int lookback = 0;
    std::vector<double> values; // K x L, [i*L + j]
    double bias = 0.0;
    bool raw_units = false; // false: normalized space

    double total() const {
        double s = bias;
        for (double v : values) s += v;
        return s;
    }
};

/// Contribution columns for every target (k, t) of one sample.
struct FullWeightMap {
    int series = 0;
    int lookback = 0;
    int horizon = 0;
    std::vector<double> values; // (K*L) x (K*T), [p * K*T + q]
    std::vector<double> bias;   // K*T
};

/// Normalized-space prediction the contribution map decomposes: the dense
/// layer output for v/c, the z-space ensemble sum for the decomposed variant.
inline double normalized_prediction(const NfclModel& m, const std::vector<double>& x_sample,
                                    int target_series, int target_step) {
    ForwardCache cache;
    forward(m, x_sample, 1, &cache);
    return cache.y_norm[static_cast<std::size_t>(target_series) * m.dims.horizon + target_step];
}

inline ContributionMap contribution(const NfclModel& m, const std::vector<double>& x_sample,
                                    int target_series, int target_step, bool raw_units = false) {
    const int K = m.dims.series, L = m.dims.lookback, T = m.dims.horizon;
    if (x_sample.size() != static_cast<std::size_t>(K) * L)
        throw std::invalid_argument("contribution: sample shape mismatch");
    if (target_series < 0 || target_series >= K || target_step < 0 || target_step >= T)
        throw std::out_of_range("contribution: target index out of range");

    ForwardCache cache;
    forward(m, x_sample, 1, &cache);
    const int q = target_series * T + target_step;
    const bool decomposed = m.variant == Variant::decomposed;

    ContributionMap map;
    map.target_series = target_series;
    map.target_step = target_step;
    map.series = K;
    map.lookback = L;
    map.values.assign(static_cast<std::size_t>(K) * L, 0.0);
    map.raw_units = raw_units;

    for (std::size_t c = 0; c < m.cores.size(); ++c) {
        const CoreModel& core = m.cores[c];
        const double a = core.norm.alpha[target_series];
        const double beta = core.norm.beta[target_series];
        // For the decomposed ensemble each core's output passes through its
        // inverse affine before the sum, so its contributions carry 1/alpha.
        const double scale = decomposed ? 1.0 / a : 1.0;
        const double* mapped = cache.cores[c].mapped.data();
        for (int p = 0; p < K * L; ++p)
            map.values[p] += mapped[p] * core.out.weight(p, q) * scale;
        map.bias += decomposed ? (core.out.b[q] - beta) / a : core.out.b[q];
    }

    if (raw_units) {
        // Rescale so entries sum to the prediction in the units of x.
        const double sd = cache.stats.stdev_at(0, target_series);
        const double mean = cache.stats.mean_at(0, target_series);
        if (decomposed) {
            for (double& v : map.values) v *= sd;
            map.bias = map.bias * sd + mean;
        } else {
            const double a = m.cores[0].norm.alpha[target_series];
            const double beta = m.cores[0].norm.beta[target_series];
            for (double& v : map.values) v *= sd / a;
            map.bias = ((map.bias - beta) / a) * sd + mean;
        }
    }
    return map;
}

inline FullWeightMap full_map(const NfclModel& m, const std::vector<double>& x_sample) {
    const int K = m.dims.series, L = m.dims.lookback, T = m.dims.horizon;
    FullWeightMap fm;
    fm.series = K;
    fm.lookback = L;
    fm.horizon = T;
    fm.values.assign(static_cast<std::size_t>(K) * L * K * T, 0.0);
    fm.bias.assign(static_cast<std::size_t>(K) * T, 0.0);
    for (int k = 0; k < K; ++k)
        for (int t = 0; t < T; ++t) {
            const ContributionMap cm = contribution(m, x_sample, k, t);
            const int q = k * T + t;
            for (int p = 0; p < K * L; ++p)
                fm.values[static_cast<std::size_t>(p) * K * T + q] = cm.values[p];
            fm.bias[q] = cm.bias;
        }
    return fm;
}

/// K rows of L comma-separated values, then a bias footer line.
inline void export_map_csv(const ContributionMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write map: " + path);
    char buf[64];
    for (int i = 0; i < map.series; ++i) {
        for (int j = 0; j < map.lookback; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", map.values[static_cast<std::size_t>(i) * map.lookback + j]);
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", map.bias);
    out << "bias," << buf << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Plain PGM (P2), one pixel per input point. Zero contribution maps to
/// mid-gray 127, the largest magnitude to the 0/255 extremes; the scale is
/// recorded in the comment line.
inline void export_map_pgm(const ContributionMap& map, const std::string& path) {
    double max_abs = 0.0;
    for (double v : map.values) max_abs = std::max(max_abs, std::abs(v));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write map: " + path);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "# contribution scale: %+.6g -> 0, 0 -> 127, %+.6g -> 255", -max_abs, max_abs);
    out << "P2\n" << buf << "\n" << map.lookback << " " << map.series << "\n255\n";
    for (int i = 0; i < map.series; ++i) {
        for (int j = 0; j < map.lookback; ++j) {
            const double v = map.values[static_cast<std::size_t>(i) * map.lookback + j];
            int pixel = 127;
            if (max_abs > 0.0)
                pixel = 127 + static_cast<int>(std::lround(v / max_abs * (v >= 0.0 ? 128.0 : 127.0)));
            pixel = std::max(0, std::min(255, pixel));
            out << (j ? " " : "") << pixel;
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Input-point rows, target columns, bias footer row.
inline void export_full_map_csv(const FullWeightMap& fm, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write map: " + path);
    const int cols = fm.series * fm.horizon;
    char buf[64];
    for (int p = 0; p < fm.series * fm.lookback; ++p) {
        for (int q = 0; q < cols; ++q) {
            std::snprintf(buf, sizeof(buf), "%.17g", fm.values[static_cast<std::size_t>(p) * cols + q]);
            out << (q ? "," : "") << buf;
        }
        out << "\n";
    }
    out << "bias";
    for (int q = 0; q < cols; ++q) {
        std::snprintf(buf, sizeof(buf), "%.17g", fm.bias[q]);
        out << "," << buf;
    }
    out << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace nfcl

#endif // NFCL_INTERPRET_HPP
