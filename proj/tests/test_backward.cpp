#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "nfcl/backward.hpp"
#include "nfcl/baselines.hpp"
#include "nfcl/forward.hpp"
#include "nfcl/rng.hpp"

using namespace nfcl;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.5, double hi = 1.5) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

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

/// Central-difference comparison over every parameter; relative error with a
/// 0.01 denominator floor so near-zero gradients compare absolutely.
template <typename ModelT>
double fd_max_rel_err(ModelT& m, const std::vector<double>& x, const std::vector<double>& y,
                      int batch, double eps = 1e-5) {
    auto refs = param_refs(m);
    const GradientSet gs = backward(m, x, y, batch);
    double worst = 0.0;
    for (std::size_t s = 0; s < refs.size(); ++s)
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
            worst = std::max(worst, std::abs(analytic - numeric) /
                                        std::max(std::abs(analytic) + std::abs(numeric), 0.01));
        }
    return worst;
}

NfclModel random_model(Rng& rng, Variant variant, ModelDims dims) {
    DecompSpec spec;
    spec.kernels = {3, 1};
    NfclModel m = init_model(variant, dims,
                             variant == Variant::vanilla ? std::vector<int>{} : std::vector<int>{4, 3},
                             spec, rng.next_u64());
    for (auto& core : m.cores) {
        for (int k = 0; k < dims.series; ++k) {
            core.norm.alpha[k] = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.3 ? -1.0 : 1.0);
            core.norm.beta[k] = rng.uniform(-0.5, 0.5);
        }
        for (double& w : core.out.w) w = rng.uniform(-0.6, 0.6);
        for (double& b : core.out.b) b = rng.uniform(-0.5, 0.5);
        if (core.has_mapping)
            for (auto& bank : core.mapping.banks) {
                for (double& w : bank.w) w = rng.uniform(-0.8, 0.8);
                for (double& b : bank.b) b = rng.uniform(-0.3, 0.3);
            }
    }
    return m;
}

} // namespace

TEST_CASE("analytic gradients match central differences across variants") {
    Rng rng(101, "fd");
    for (Variant variant : {Variant::vanilla, Variant::mapped, Variant::decomposed}) {
        for (int rep = 0; rep < 5; ++rep) {
            ModelDims dims{1 + static_cast<int>(rng.next_below(3)),
                           2 + static_cast<int>(rng.next_below(5)),
                           1 + static_cast<int>(rng.next_below(3))};
            NfclModel m = random_model(rng, variant, dims);
            const int batch = 1 + static_cast<int>(rng.next_below(3));
            auto x = random_vec(rng, static_cast<std::size_t>(batch) * dims.input_points());
            auto y = random_vec(rng, static_cast<std::size_t>(batch) * dims.output_points());
            const double err = fd_max_rel_err(m, x, y, batch);
            INFO("variant " << variant_tag(variant) << " rep " << rep << " err " << err);
            REQUIRE(err <= 1e-4);
        }
    }
}

TEST_CASE("analytic gradients match central differences for the baselines") {
    Rng rng(102, "fdb");
    const ModelDims dims{3, 6, 3};
    NLinearModel nl = init_nlinear(dims, rng.next_u64());
    for (double& w : nl.w) w = rng.uniform(-0.6, 0.6);
    for (double& b : nl.b) b = rng.uniform(-0.5, 0.5);
    auto x = random_vec(rng, 2 * dims.input_points());
    auto y = random_vec(rng, 2 * dims.output_points());
    REQUIRE(fd_max_rel_err(nl, x, y, 2) <= 1e-4);

    DLinearModel dl = init_dlinear(dims, 3, rng.next_u64());
    for (double& w : dl.trend_w) w = rng.uniform(-0.6, 0.6);
    for (double& w : dl.seasonal_w) w = rng.uniform(-0.6, 0.6);
    REQUIRE(fd_max_rel_err(dl, x, y, 2) <= 1e-4);
}

TEST_CASE("at the optimum the loss and every gradient vanish") {
    Rng rng(103, "opt");
    const ModelDims dims{2, 5, 2};
    NfclModel m = init_model(Variant::vanilla, dims, {}, {}, 55);
    std::fill(m.cores[0].out.w.begin(), m.cores[0].out.w.end(), 0.0);
    for (double& b : m.cores[0].out.b) b = rng.uniform(-1, 1);
    m.cores[0].norm.alpha = {1.4, 0.6};
    m.cores[0].norm.beta = {0.2, -0.3};

    const int batch = 3;
    auto x = random_vec(rng, static_cast<std::size_t>(batch) * dims.input_points());
    auto y_true = forward(m, x, batch); // exact optimum by construction
    GradientSet gs = backward(m, x, y_true, batch);
    REQUIRE(gs.loss == 0.0);
    for (const auto& slot : gs.slots)
        for (double g : slot) REQUIRE(g == 0.0);
}

TEST_CASE("gradients are linear in the residual") {
    Rng rng(104, "lin");
    const ModelDims dims{2, 6, 2};
    NfclModel m = random_model(rng, Variant::mapped, dims);
    const int batch = 2;
    auto x = random_vec(rng, static_cast<std::size_t>(batch) * dims.input_points());
    auto y1 = random_vec(rng, static_cast<std::size_t>(batch) * dims.output_points());

    // y2 doubles every residual while the prediction point stays fixed
    auto pred = predict(m, x, batch);
    std::vector<double> y2(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) y2[i] = pred[i] - 2.0 * (pred[i] - y1[i]);

    GradientSet g1 = backward(m, x, y1, batch);
    GradientSet g2 = backward(m, x, y2, batch);
    for (std::size_t s = 0; s < g1.slots.size(); ++s)
        for (std::size_t i = 0; i < g1.slots[s].size(); ++i)
            REQUIRE_THAT(g2.slots[s][i],
                         WithinAbs(2.0 * g1.slots[s][i],
                                   1e-9 * std::max(1.0, std::abs(g1.slots[s][i]))));
}

TEST_CASE("threaded backward is reproducible and matches serial") {
    Rng rng(105, "thr");
    const ModelDims dims{2, 8, 3};
    NfclModel m = random_model(rng, Variant::mapped, dims);
    const int batch = 13;
    auto x = random_vec(rng, static_cast<std::size_t>(batch) * dims.input_points());
    auto y = random_vec(rng, static_cast<std::size_t>(batch) * dims.output_points());

    GradientSet serial = backward(m, x, y, batch, 1);
    GradientSet par_a = backward(m, x, y, batch, 3);
    GradientSet par_b = backward(m, x, y, batch, 3);
    for (std::size_t s = 0; s < serial.slots.size(); ++s)
        for (std::size_t i = 0; i < serial.slots[s].size(); ++i) {
            REQUIRE(par_a.slots[s][i] == par_b.slots[s][i]); // fixed reduction order
            REQUIRE_THAT(par_a.slots[s][i],
                         WithinAbs(serial.slots[s][i],
                                   1e-12 * std::max(1.0, std::abs(serial.slots[s][i]))));
        }
}

TEST_CASE("non-finite targets raise the divergence error") {
    const ModelDims dims{1, 4, 1};
    NfclModel m = init_model(Variant::vanilla, dims, {}, {}, 1);
    std::vector<double> x{1, 2, 3, 4};
    std::vector<double> y{std::numeric_limits<double>::infinity()};
    REQUIRE_THROWS_AS(backward(m, x, y, 1), DivergedError);
}
