#ifndef NFCL_DATASET_HPP
#define NFCL_DATASET_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nfcl {

/// K named series over N timesteps, one row per series.
struct TimeSeriesDataset {
    std::vector<std::string> names;
    std::vector<double> values; // series-major: values[k * steps + j]
    int series = 0;             // K
    int steps = 0;              // N
    std::optional<std::string> freq;
    std::string origin;

    double at(int k, int j) const { return values[static_cast<std::size_t>(k) * steps + j]; }
    double& at(int k, int j) { return values[static_cast<std::size_t>(k) * steps + j]; }
};

struct SplitSpec {
    double train_frac = 0.6;
    double val_frac = 0.2;
    double test_frac = 0.2;

    void validate() const {
        auto in_range = [](double f) { return f > 0.0 && f < 1.0; };
        if (!in_range(train_frac) || !in_range(val_frac) || !in_range(test_frac))
            throw std::invalid_argument("split fractions must lie in (0,1)");
        if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
            throw std::invalid_argument("split fractions must sum to 1");
    }
};

struct SplitResult {
    TimeSeriesDataset train, val, test;
};

/// Per-variable statistics fit on the training segment only.
struct ScaleState {
    std::vector<double> mean;
    std::vector<double> stdev;
};

/// Paired lookback/target windows. x is count x K x L, y is count x K x T.
struct WindowBatch {
    int count = 0;
    int series = 0;
    int lookback = 0;
    int horizon = 0;
    std::vector<double> x; // [(b*K + k)*L + j]
    std::vector<double> y; // [(b*K + k)*T + t]
    std::vector<int> offsets;

    std::size_t x_elems() const { return static_cast<std::size_t>(count) * series * lookback; }
    std::size_t y_elems() const { return static_cast<std::size_t>(count) * series * horizon; }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r' && i + 1 == line.size()) {
            // trailing CR from CRLF
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

} // namespace detail

/// Loads an RFC-4180 CSV with a header row. A column whose header equals
/// `date_col` is excluded from the K series; all other cells must parse as
/// 64-bit floats and be finite.
inline TimeSeriesDataset load_csv(const std::string& path,
                                  const std::optional<std::string>& date_col = std::string("date")) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file (header row required)");
    std::vector<std::string> header = detail::split_csv_line(line);

    std::vector<int> keep;
    std::vector<std::string> names;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        std::string name(detail::trim(header[c]));
        if (date_col && name == *date_col) continue;
        keep.push_back(c);
        names.push_back(name);
    }
    if (keep.empty()) throw std::runtime_error(path + ": no value columns after exclusions");

    const int cols = static_cast<int>(header.size());
    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        std::vector<std::string> fields = detail::split_csv_line(line);
        if (static_cast<int>(fields.size()) != cols)
            throw std::runtime_error(path + ": row " + std::to_string(line_no) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(cols));
        std::vector<double> row(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            const std::string& cell = fields[static_cast<std::size_t>(keep[i])];
            double v;
            if (!detail::parse_double(cell, v) || !std::isfinite(v))
                throw std::runtime_error(path + ": row " + std::to_string(line_no) + " column '" +
                                         names[i] + "': cannot parse '" + cell + "' as a finite number");
            row[i] = v;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");

    TimeSeriesDataset ds;
    ds.names = std::move(names);
    ds.series = static_cast<int>(keep.size());
    ds.steps = static_cast<int>(rows.size());
    ds.origin = path;
    ds.values.resize(static_cast<std::size_t>(ds.series) * ds.steps);
    for (int j = 0; j < ds.steps; ++j)
        for (int k = 0; k < ds.series; ++k)
            ds.at(k, j) = rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    return ds;
}

inline TimeSeriesDataset slice_steps(const TimeSeriesDataset& ds, int begin, int end) {
    TimeSeriesDataset out;
    out.names = ds.names;
    out.series = ds.series;
    out.steps = end - begin;
    out.freq = ds.freq;
    out.origin = ds.origin;
    out.values.resize(static_cast<std::size_t>(out.series) * out.steps);
    for (int k = 0; k < ds.series; ++k)
        for (int j = begin; j < end; ++j)
            out.at(k, j - begin) = ds.at(k, j);
    return out;
}

/// Chronological split. Segment sizes are floor(N*train_frac) and
/// floor(N*val_frac); the remainder becomes the test segment.
inline SplitResult split_chronological(const TimeSeriesDataset& ds, const SplitSpec& spec = {}) {
    spec.validate();
    const int n = ds.steps;
    const int n_train = static_cast<int>(std::floor(n * spec.train_frac));
    const int n_val = static_cast<int>(std::floor(n * spec.val_frac));
    const int n_test = n - n_train - n_val;
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw std::runtime_error("split would produce an empty segment (N=" + std::to_string(n) + ")");
    SplitResult out;
    out.train = slice_steps(ds, 0, n_train);
    out.val = slice_steps(ds, n_train, n_train + n_val);
    out.test = slice_steps(ds, n_train + n_val, n);
    return out;
}

/// Per-variable mean and population std over the train segment, std floored
/// at 1e-8 so constant series stay invertible.
inline ScaleState fit_scale(const TimeSeriesDataset& train) {
    if (train.series < 1 || train.steps < 1)
        throw std::invalid_argument("fit_scale: empty dataset");
    ScaleState s;
    s.mean.resize(train.series);
    s.stdev.resize(train.series);
    for (int k = 0; k < train.series; ++k) {
        double sum = 0.0;
        for (int j = 0; j < train.steps; ++j) sum += train.at(k, j);
        const double mean = sum / train.steps;
        double ss = 0.0;
        for (int j = 0; j < train.steps; ++j) {
            const double d = train.at(k, j) - mean;
            ss += d * d;
        }
        s.mean[k] = mean;
        s.stdev[k] = std::max(std::sqrt(ss / train.steps), 1e-8);
    }
    return s;
}

inline TimeSeriesDataset apply_scale(const TimeSeriesDataset& ds, const ScaleState& s) {
    if (static_cast<int>(s.mean.size()) != ds.series)
        throw std::invalid_argument("apply_scale: dimension mismatch");
    TimeSeriesDataset out = ds;
    for (int k = 0; k < ds.series; ++k)
        for (int j = 0; j < ds.steps; ++j)
            out.at(k, j) = (ds.at(k, j) - s.mean[k]) / s.stdev[k];
    return out;
}

inline TimeSeriesDataset inverse_scale(const TimeSeriesDataset& ds, const ScaleState& s) {
    if (static_cast<int>(s.mean.size()) != ds.series)
        throw std::invalid_argument("inverse_scale: dimension mismatch");
    TimeSeriesDataset out = ds;
    for (int k = 0; k < ds.series; ++k)
        for (int j = 0; j < ds.steps; ++j)
            out.at(k, j) = ds.at(k, j) * s.stdev[k] + s.mean[k];
    return out;
}

/// One-step sliding windows: sample i reads steps [i, i+L) as history and
/// [i+L, i+L+T) as target, giving N-L-T+1 samples.
inline WindowBatch make_windows(const TimeSeriesDataset& ds, int lookback, int horizon) {
    if (lookback < 1 || horizon < 1)
        throw std::invalid_argument("make_windows: lookback and horizon must be >= 1");
    const int count = ds.steps - lookback - horizon + 1;
    if (count < 1)
        throw std::runtime_error("make_windows: segment too short (N=" + std::to_string(ds.steps) +
                                 ", need >= " + std::to_string(lookback + horizon) + ")");
    WindowBatch wb;
    wb.count = count;
    wb.series = ds.series;
    wb.lookback = lookback;
    wb.horizon = horizon;
    wb.x.resize(wb.x_elems());
    wb.y.resize(wb.y_elems());
    wb.offsets.resize(count);
    for (int b = 0; b < count; ++b) {
        wb.offsets[b] = b;
        for (int k = 0; k < ds.series; ++k) {
            for (int j = 0; j < lookback; ++j)
                wb.x[(static_cast<std::size_t>(b) * ds.series + k) * lookback + j] = ds.at(k, b + j);
            for (int t = 0; t < horizon; ++t)
                wb.y[(static_cast<std::size_t>(b) * ds.series + k) * horizon + t] =
                    ds.at(k, b + lookback + t);
        }
    }
    return wb;
}

/// Copies the selected samples of a batch, preserving their order.
inline WindowBatch gather_samples(const WindowBatch& wb, const std::vector<int>& idx) {
    WindowBatch out;
    out.count = static_cast<int>(idx.size());
    out.series = wb.series;
    out.lookback = wb.lookback;
    out.horizon = wb.horizon;
    out.x.resize(out.x_elems());
    out.y.resize(out.y_elems());
    out.offsets.resize(idx.size());
    const std::size_t xs = static_cast<std::size_t>(wb.series) * wb.lookback;
    const std::size_t ys = static_cast<std::size_t>(wb.series) * wb.horizon;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t b = static_cast<std::size_t>(idx[i]);
        std::copy_n(wb.x.begin() + b * xs, xs, out.x.begin() + i * xs);
        std::copy_n(wb.y.begin() + b * ys, ys, out.y.begin() + i * ys);
        out.offsets[i] = wb.offsets[b];
    }
    return out;
}

} // namespace nfcl

#endif // NFCL_DATASET_HPP
