#ifndef NFCL_PIPELINE_HPP
#define NFCL_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "nfcl/dataset.hpp"

namespace nfcl {

/// Everything the commands need from one CSV: chronological split, scaling
/// fit on the train segment and applied unchanged to all three, per-segment
/// windows.
struct PreparedData {
    TimeSeriesDataset raw;
    ScaleState scale;
    TimeSeriesDataset train, val, test; // scaled
    WindowBatch train_windows, val_windows, test_windows;
    std::vector<std::string> warnings;
};

inline PreparedData prepare_data(const std::string& path, const std::optional<std::string>& date_col,
                                 const SplitSpec& split, int lookback, int horizon) {
    PreparedData out;
    out.raw = load_csv(path, date_col);
    SplitResult parts = split_chronological(out.raw, split);
    out.scale = fit_scale(parts.train);

    if (!(lookback > horizon && horizon > 1))
        out.warnings.push_back("lookback " + std::to_string(lookback) + " and horizon " +
                               std::to_string(horizon) + " leave the intended L > T > 1 regime");
    for (const auto* seg : {&parts.train, &parts.val, &parts.test})
        if (seg->steps < lookback + horizon)
            out.warnings.push_back("segment with " + std::to_string(seg->steps) +
                                   " steps is too short for L+T=" +
                                   std::to_string(lookback + horizon) + " windows");

    out.train = apply_scale(parts.train, out.scale);
    out.val = apply_scale(parts.val, out.scale);
    out.test = apply_scale(parts.test, out.scale);
    out.train_windows = make_windows(out.train, lookback, horizon);
    out.val_windows = make_windows(out.val, lookback, horizon);
    out.test_windows = make_windows(out.test, lookback, horizon);
    return out;
}

} // namespace nfcl

#endif // NFCL_PIPELINE_HPP
