#ifndef NFCL_METRICS_HPP
#define NFCL_METRICS_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfcl {

namespace detail {
inline void check_metric_input(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("metrics: shape mismatch");
    if (y.empty()) throw std::invalid_argument("metrics: empty input");
}
} // namespace detail

/// Mean absolute error over all B*K*T elements.
inline double mae(const std::vector<double>& y, const std::vector<double>& yhat) {
    detail::check_metric_input(y, yhat);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += std::abs(y[i] - yhat[i]);
    return sum / static_cast<double>(y.size());
}

/// Mean squared error over all B*K*T elements.
inline double mse(const std::vector<double>& y, const std::vector<double>& yhat) {
    detail::check_metric_input(y, yhat);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        sum += d * d;
    }
    return sum / static_cast<double>(y.size());
}

/// 100 * mean of |y - yhat| / (|y| + |yhat|); a 0/0 term contributes 0.
inline double smape(const std::vector<double>& y, const std::vector<double>& yhat) {
    detail::check_metric_input(y, yhat);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double denom = std::abs(y[i]) + std::abs(yhat[i]);
        if (denom > 0.0) sum += std::abs(y[i] - yhat[i]) / denom;
    }
    return 100.0 * sum / static_cast<double>(y.size());
}

/// 1 - SS_res/SS_tot with SS_tot centered on the per-variable mean of y over
/// the whole test set. Arrays are B x K x T; returns NaN when SS_tot is zero.
inline double r2(const std::vector<double>& y, const std::vector<double>& yhat, int series,
                 int horizon) {
    detail::check_metric_input(y, yhat);
    const std::size_t per_sample = static_cast<std::size_t>(series) * horizon;
    if (per_sample == 0 || y.size() % per_sample != 0)
        throw std::invalid_argument("r2: shape mismatch");
    const std::size_t count = y.size() / per_sample;

    std::vector<double> var_mean(series, 0.0);
    for (std::size_t b = 0; b < count; ++b)
        for (int k = 0; k < series; ++k) {
            const std::size_t base = (b * series + k) * horizon;
            for (int t = 0; t < horizon; ++t) var_mean[k] += y[base + t];
        }
    for (int k = 0; k < series; ++k) var_mean[k] /= static_cast<double>(count * horizon);

    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t b = 0; b < count; ++b)
        for (int k = 0; k < series; ++k) {
            const std::size_t base = (b * series + k) * horizon;
            for (int t = 0; t < horizon; ++t) {
                const double dr = y[base + t] - yhat[base + t];
                const double dt = y[base + t] - var_mean[k];
                ss_res += dr * dr;
                ss_tot += dt * dt;
            }
        }
    if (ss_tot == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return 1.0 - ss_res / ss_tot;
}

struct MetricsReport {
    double mae = 0.0;
    double mse = 0.0;
    double smape = 0.0; // percent
    double r2 = 0.0;    // NaN when the target variance is zero
    int count = 0;      // |D'|
    int series = 0;
    int horizon = 0;
};

inline MetricsReport compute_metrics(const std::vector<double>& y, const std::vector<double>& yhat,
                                     int count, int series, int horizon) {
    MetricsReport rep;
    rep.mae = mae(y, yhat);
    rep.mse = mse(y, yhat);
    rep.smape = smape(y, yhat);
    rep.r2 = r2(y, yhat, series, horizon);
    rep.count = count;
    rep.series = series;
    rep.horizon = horizon;
    return rep;
}

inline std::string metrics_csv_header() { return "samples,series,horizon,mae,mse,smape,r2"; }

inline std::string metrics_csv_row(const MetricsReport& rep) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g,%.17g,%.17g", rep.count, rep.series,
                  rep.horizon, rep.mae, rep.mse, rep.smape, rep.r2);
    return buf;
}

inline std::string metrics_table(const MetricsReport& rep) {
    char buf[512];
    if (std::isnan(rep.r2)) {
        std::snprintf(buf, sizeof(buf),
                      "samples %d  series %d  horizon %d\n"
                      "  MAE    %.6f\n  MSE    %.6f\n  SMAPE  %.4f%%\n"
                      "  R2     undefined (zero target variance)\n",
                      rep.count, rep.series, rep.horizon, rep.mae, rep.mse, rep.smape);
    } else {
        std::snprintf(buf, sizeof(buf),
                      "samples %d  series %d  horizon %d\n"
                      "  MAE    %.6f\n  MSE    %.6f\n  SMAPE  %.4f%%\n  R2     %.6f\n",
                      rep.count, rep.series, rep.horizon, rep.mae, rep.mse, rep.smape, rep.r2);
    }
    return buf;
}

} // namespace nfcl

#endif // NFCL_METRICS_HPP
