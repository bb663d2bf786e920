#ifndef NFCL_VERIFY_HPP
#define NFCL_VERIFY_HPP

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "nfcl/backward.hpp"
#include "nfcl/baselines.hpp"
#include "nfcl/forward.hpp"
#include "nfcl/interpret.hpp"
#include "nfcl/metrics.hpp"
#include "nfcl/model.hpp"
#include "nfcl/optim.hpp"
#include "nfcl/rng.hpp"

namespace nfcl {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

template <typename ModelT>
double loss_of(const ModelT& m, const std::vector<double>& x, const std::vector<double>& y,
               int batch) {
    std::vector<double> pred = predict(m, x, batch);
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - y[i];
        sse += d * d;
    }
    return sse / static_cast<double>(pred.size());
}

/// Central-difference check of every analytic gradient. Relative error uses
/// a 0.01 denominator floor so near-zero gradients compare absolutely.
template <typename ModelT>
double max_gradient_rel_err(ModelT& m, const std::vector<double>& x, const std::vector<double>& y,
                            int batch, double eps = 1e-5) {
    std::vector<ParamRef> refs = param_refs(m);
    const GradientSet gs = backward(m, x, y, batch);
    double worst = 0.0;
    for (std::size_t s = 0; s < refs.size(); ++s) {
        for (std::size_t i = 0; i < refs[s].size; ++i) {
            double& theta = refs[s].data[i];
            const double saved = theta;
            theta = saved + eps;
            const double lp = loss_of(m, x, y, batch);
            theta = saved - eps;
            const double lm = loss_of(m, x, y, batch);
            theta = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double analytic = gs.slots[s][i];
            const double rel = std::abs(analytic - numeric) /
                               std::max(std::abs(analytic) + std::abs(numeric), 0.01);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

inline std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

/// Random small model with non-degenerate norm parameters for checks.
inline NfclModel random_check_model(Rng& rng, Variant variant, ModelDims dims,
                                    const std::vector<int>& hidden, const std::vector<int>& kernels) {
    DecompSpec spec;
    spec.kernels = kernels;
    NfclModel m = init_model(variant, dims, variant == Variant::vanilla ? std::vector<int>{} : hidden,
                             spec, rng.next_u64());
    for (auto& core : m.cores) {
        for (int k = 0; k < dims.series; ++k) {
            core.norm.alpha[k] = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            core.norm.beta[k] = rng.uniform(-0.5, 0.5);
        }
        for (double& w : core.out.w) w = rng.uniform(-0.5, 0.5);
        for (double& b : core.out.b) b = rng.uniform(-0.5, 0.5);
        if (core.has_mapping)
            for (auto& bank : core.mapping.banks) {
                for (double& w : bank.w) w = rng.uniform(-0.8, 0.8);
                for (double& b : bank.b) b = rng.uniform(-0.3, 0.3);
            }
    }
    return m;
}

} // namespace detail

/// Built-in verification battery used by the `verify` subcommand.
inline std::vector<CheckResult> run_verification() {
    std::vector<CheckResult> results;
    char buf[256];
    auto record = [&](const std::string& name, bool pass, const std::string& detail) {
        results.push_back({name, pass, detail});
    };
    auto expect_count = [&](const std::string& name, long long actual, long long expected) {
        std::snprintf(buf, sizeof(buf), "expected %lld, got %lld", expected, actual);
        record(name, actual == expected, buf);
    };

    // Parameter counts for the published shapes.
    {
        ModelDims weather{21, 24, 6}, ill{7, 24, 6};
        expect_count("param count v  K=21 L=24 T=6",
                     parameter_count(init_model(Variant::vanilla, weather, {})), 63672);
        expect_count("param count c  K=21 L=24 T=6 h=[32]",
                     parameter_count(init_model(Variant::mapped, weather, {32})), 112560);
        expect_count("param count v  K=7  L=24 T=6",
                     parameter_count(init_model(Variant::vanilla, ill, {})), 7112);
        expect_count("param count c  K=7  L=24 T=6 h=[32]",
                     parameter_count(init_model(Variant::mapped, ill, {32})), 23408);
        expect_count("param count nlinear L=24 T=6",
                     parameter_count(init_nlinear({7, 24, 6})), 150);
        expect_count("param count dlinear L=24 T=6",
                     parameter_count(init_dlinear({7, 24, 6})), 300);
        const long long c = parameter_count(init_model(Variant::mapped, ill, {32}));
        const long long d = parameter_count(init_model(Variant::decomposed, ill, {32}, DecompSpec{}));
        std::snprintf(buf, sizeof(buf), "d=%lld, 3*c=%lld", d, 3 * c);
        record("param count d = 3x c for kernels [10,4,1]", d == 3 * c, buf);
    }

    // Analytic gradients vs central differences.
    {
        Rng rng(20240517, "verify-grad");
        double worst = 0.0;
        const Variant variants[] = {Variant::vanilla, Variant::mapped, Variant::decomposed};
        for (int rep = 0; rep < 4; ++rep)
            for (Variant v : variants) {
                ModelDims dims{1 + static_cast<int>(rng.next_below(3)),
                               2 + static_cast<int>(rng.next_below(5)),
                               1 + static_cast<int>(rng.next_below(3))};
                NfclModel m = detail::random_check_model(rng, v, dims, {3}, {2, 1});
                const int batch = 2;
                auto x = detail::random_vec(rng, static_cast<std::size_t>(batch) * dims.input_points());
                auto y = detail::random_vec(rng, static_cast<std::size_t>(batch) * dims.output_points());
                worst = std::max(worst, detail::max_gradient_rel_err(m, x, y, batch));
            }
        std::snprintf(buf, sizeof(buf), "max relative error %.3g (tolerance 1e-4)", worst);
        record("gradient check (12 random models)", worst <= 1e-4, buf);
    }

    // Grouped point evaluation vs the double-loop reference, bit for bit.
    {
        Rng rng(77, "verify-group");
        bool equal = true;
        for (int rep = 0; rep < 5 && equal; ++rep) {
            ModelDims dims{1 + static_cast<int>(rng.next_below(4)),
                           1 + static_cast<int>(rng.next_below(6)),
                           1};
            NfclModel m = detail::random_check_model(rng, Variant::mapped, dims, {4, 3}, {2, 1});
            const int batch = 1 + static_cast<int>(rng.next_below(8));
            auto x = detail::random_vec(rng, static_cast<std::size_t>(batch) * dims.input_points());
            auto a = map_points(x, batch, m.cores[0].mapping);
            auto b = map_points_reference(x, batch, m.cores[0].mapping);
            for (std::size_t i = 0; i < a.size(); ++i)
                if (a[i] != b[i]) equal = false;
        }
        record("grouped point networks == loop reference", equal,
               equal ? "bit-identical" : "mismatch found");
    }

    // Decomposition components sum back to the input.
    {
        Rng rng(78, "verify-decomp");
        double worst = 0.0;
        DecompSpec spec;
        for (int rep = 0; rep < 5; ++rep) {
            const int batch = 2, series = 3, lookback = 16;
            auto x = detail::random_vec(rng, static_cast<std::size_t>(batch) * series * lookback, -5, 5);
            auto comps = decompose(x, batch, series, lookback, spec);
            for (std::size_t i = 0; i < x.size(); ++i) {
                double sum = 0.0;
                for (const auto& c : comps) sum += c[i];
                worst = std::max(worst, std::abs(sum - x[i]));
            }
        }
        std::snprintf(buf, sizeof(buf), "max |sum - input| = %.3g (tolerance 1e-12)", worst);
        record("decomposition reconstruction identity", worst <= 1e-12, buf);
    }

    // Normalization round trip.
    {
        Rng rng(79, "verify-norm");
        const int batch = 4, series = 3, lookback = 12;
        NormParams p;
        p.alpha = detail::random_vec(rng, series, 0.5, 2.0);
        p.beta = detail::random_vec(rng, series, -1.0, 1.0);
        auto x = detail::random_vec(rng, static_cast<std::size_t>(batch) * series * lookback, -3, 3);
        NormStats stats;
        auto xt = instance_normalize(x, batch, series, lookback, p, stats);
        auto back = instance_denormalize(xt, batch, series, lookback, p, stats);
        double worst = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            worst = std::max(worst, std::abs(back[i] - x[i]) / std::max(1.0, std::abs(x[i])));
        std::snprintf(buf, sizeof(buf), "max relative error %.3g (tolerance 1e-9)", worst);
        record("instance normalization round trip", worst <= 1e-9, buf);
    }

    // Contribution maps reproduce the normalized prediction.
    {
        Rng rng(80, "verify-maps");
        double worst = 0.0;
        const Variant variants[] = {Variant::vanilla, Variant::mapped, Variant::decomposed};
        for (Variant v : variants) {
            ModelDims dims{2, 5, 3};
            NfclModel m = detail::random_check_model(rng, v, dims, {3}, {2, 1});
            auto x = detail::random_vec(rng, static_cast<std::size_t>(dims.input_points()));
            for (int k = 0; k < dims.series; ++k)
                for (int t = 0; t < dims.horizon; ++t) {
                    const double want = normalized_prediction(m, x, k, t);
                    const double got = contribution(m, x, k, t).total();
                    worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
                }
        }
        std::snprintf(buf, sizeof(buf), "max relative error %.3g (tolerance 1e-9)", worst);
        record("contribution map faithfulness", worst <= 1e-9, buf);
    }

    // Metric formulas on fixed cases.
    {
        const std::vector<double> y{1, 2}, yh{2, 4};
        const bool ok_mae = std::abs(mae(y, yh) - 1.5) == 0.0;
        const bool ok_mse = std::abs(mse(y, yh) - 2.5) == 0.0;
        const bool ok_smape = smape({-1}, {1}) == 100.0;
        const bool ok_r2 = r2({1, 2, 3}, {1, 2, 2}, 1, 1) == 0.5;
        std::snprintf(buf, sizeof(buf), "mae=%.3f mse=%.3f smape=%.1f r2=%.2f", mae(y, yh),
                      mse(y, yh), smape({-1}, {1}), r2({1, 2, 3}, {1, 2, 2}, 1, 1));
        record("metric fixed cases (1.5 / 2.5 / 100 / 0.5)",
               ok_mae && ok_mse && ok_smape && ok_r2, buf);
    }

    // One AdamW step on a scalar.
    {
        double theta = 1.0;
        std::vector<ParamRef> refs{{"theta", &theta, 1, true, 0.0}};
        GradientSet gs;
        gs.slots.push_back({1.0});
        AdamWState st = make_adamw_state(refs);
        TrainConfig cfg;
        adamw_step(refs, gs, st, cfg);
        const double expected = 1.0 - 0.001 * (1.0 / (1.0 + 1e-8)) - 0.001 * 0.01 * 1.0;
        std::snprintf(buf, sizeof(buf), "theta=%.12f expected %.12f", theta, expected);
        record("adamw first-step update", std::abs(theta - expected) < 1e-15, buf);
    }

    return results;
}

} // namespace nfcl

#endif // NFCL_VERIFY_HPP
