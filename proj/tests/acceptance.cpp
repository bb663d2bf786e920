// Acceptance suite: one pass/fail line per criterion, nonzero exit when a
// hard criterion fails. The real-data benchmark at the end is advisory and
// runs only when NFCL_ETTH1_CSV points at the dataset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nfcl/nfcl.hpp"

using namespace nfcl;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %-42s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

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

// Central differences at eps=1e-5; relative error carries a 0.01 denominator
// floor so near-zero gradients are compared absolutely.
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
            worst = std::max(worst, std::abs(gs.slots[s][i] - numeric) /
                                        std::max(std::abs(gs.slots[s][i]) + std::abs(numeric), 0.01));
        }
    return worst;
}

NfclModel random_model(Rng& rng, Variant variant, ModelDims dims, const std::vector<int>& hidden,
                       const std::vector<int>& kernels) {
    DecompSpec spec;
    spec.kernels = kernels;
    NfclModel m = init_model(variant, dims,
                             variant == Variant::vanilla ? std::vector<int>{} : hidden, spec,
                             rng.next_u64());
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

// Windows with exactly standardized rows and targets from a fixed random
// linear map of the flattened input plus Gaussian noise. Standardized rows
// make the map representable through the normalization wrapper.
WindowBatch synthetic_linear(int count, int series, int lookback, int horizon, double noise,
                             std::uint64_t seed) {
    WindowBatch wb;
    wb.count = count;
    wb.series = series;
    wb.lookback = lookback;
    wb.horizon = horizon;
    wb.x.resize(wb.x_elems());
    wb.y.resize(wb.y_elems());
    wb.offsets.resize(count);
    std::iota(wb.offsets.begin(), wb.offsets.end(), 0);

    const int P = series * lookback, Q = series * horizon;
    Rng map_rng(seed, "map");
    std::vector<double> a(static_cast<std::size_t>(P) * Q);
    const double scale = 1.0 / std::sqrt(static_cast<double>(P));
    for (double& v : a) v = map_rng.normal() * scale;

    Rng rng(seed, "data");
    for (int b = 0; b < count; ++b) {
        double* row0 = wb.x.data() + static_cast<std::size_t>(b) * P;
        for (int k = 0; k < series; ++k) {
            double* row = row0 + static_cast<std::size_t>(k) * lookback;
            for (int j = 0; j < lookback; ++j) row[j] = rng.normal();
            double mean = 0;
            for (int j = 0; j < lookback; ++j) mean += row[j];
            mean /= lookback;
            double ss = 0;
            for (int j = 0; j < lookback; ++j) ss += (row[j] - mean) * (row[j] - mean);
            const double sd = std::sqrt(ss / lookback);
            for (int j = 0; j < lookback; ++j) row[j] = (row[j] - mean) / sd;
        }
        double* yrow = wb.y.data() + static_cast<std::size_t>(b) * Q;
        for (int q = 0; q < Q; ++q) {
            double acc = 0;
            for (int p = 0; p < P; ++p) acc += row0[p] * a[static_cast<std::size_t>(p) * Q + q];
            yrow[q] = acc + noise * rng.normal();
        }
    }
    return wb;
}

WindowBatch take(const WindowBatch& wb, int lo, int hi) {
    std::vector<int> idx(hi - lo);
    std::iota(idx.begin(), idx.end(), lo);
    return gather_samples(wb, idx);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

char buf[256];

void criterion_parameter_counts() {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelDims weather{21, 24, 6}, ill{7, 24, 6};
    struct Row {
        const char* name;
        long long actual, expected;
    };
    const Row rows[] = {
        {"v K=21", parameter_count(init_model(Variant::vanilla, weather, {})), 63672},
        {"c K=21", parameter_count(init_model(Variant::mapped, weather, {32})), 112560},
        {"v K=7", parameter_count(init_model(Variant::vanilla, ill, {})), 7112},
        {"c K=7", parameter_count(init_model(Variant::mapped, ill, {32})), 23408},
        {"nlinear", parameter_count(init_nlinear({7, 24, 6})), 150},
        {"dlinear", parameter_count(init_dlinear({7, 24, 6})), 300},
    };
    bool pass = true;
    std::string bad;
    for (const Row& r : rows)
        if (r.actual != r.expected) {
            pass = false;
            bad += std::string(r.name) + " ";
        }
    const double dt = seconds_since(t0);
    pass = pass && dt < 1.0;
    std::snprintf(buf, sizeof(buf), "six shapes exact%s%s (%.3fs)", pass ? "" : "; wrong: ",
                  bad.c_str(), dt);
    report("parameter counts", pass, buf);

    const long long c = parameter_count(init_model(Variant::mapped, ill, {32}));
    const long long d = parameter_count(init_model(Variant::decomposed, ill, {32}, DecompSpec{}));
    std::snprintf(buf, sizeof(buf), "d=%lld, 3*c=%lld", d, 3 * c);
    report("decomposed count = 3x mapped count", d == 3 * c, buf);
}

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(424242, "acceptance-grad");
    const Variant variants[] = {Variant::vanilla, Variant::mapped, Variant::decomposed};
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const Variant v = variants[rep % 3];
        ModelDims dims{1 + static_cast<int>(rng.next_below(3)),
                       2 + static_cast<int>(rng.next_below(5)),
                       1 + static_cast<int>(rng.next_below(3))};
        std::vector<int> hidden = rng.uniform() < 0.5 ? std::vector<int>{4} : std::vector<int>{4, 4};
        NfclModel m = random_model(rng, v, dims, hidden, {2, 1});
        const int batch = 1 + static_cast<int>(rng.next_below(3));
        auto x = random_vec(rng, static_cast<std::size_t>(batch) * dims.input_points());
        auto y = random_vec(rng, static_cast<std::size_t>(batch) * dims.output_points());
        worst = std::max(worst, fd_max_rel_err(m, x, y, batch));
    }
    const double dt = seconds_since(t0);
    std::snprintf(buf, sizeof(buf), "max rel err %.3g over 100 configs (tol 1e-4, %.1fs < 60s)",
                  worst, dt);
    report("gradient correctness", worst <= 1e-4 && dt < 60.0, buf);
}

void criterion_grouped_equivalence() {
    Rng rng(515151, "acceptance-group");
    int mismatches = 0;
    for (int rep = 0; rep < 50; ++rep) {
        ModelDims dims{1 + static_cast<int>(rng.next_below(4)),
                       1 + static_cast<int>(rng.next_below(8)),
                       1};
        std::vector<int> hidden{1 + static_cast<int>(rng.next_below(6))};
        if (rng.uniform() < 0.5) hidden.push_back(1 + static_cast<int>(rng.next_below(5)));
        NfclModel m = random_model(rng, Variant::mapped, dims, hidden, {2, 1});
        const int batch = 1 + static_cast<int>(rng.next_below(8));
        auto x = random_vec(rng, static_cast<std::size_t>(batch) * dims.input_points());
        auto grouped = map_points(x, batch, m.cores[0].mapping);
        auto loop = map_points_reference(x, batch, m.cores[0].mapping);
        for (std::size_t i = 0; i < grouped.size(); ++i)
            if (grouped[i] != loop[i]) ++mismatches;
    }
    std::snprintf(buf, sizeof(buf), "%d mismatching values over 50 random shapes", mismatches);
    report("grouped == loop reference (bit-exact)", mismatches == 0, buf);
}

void criterion_decomposition() {
    Rng rng(626262, "acceptance-decomp");
    double worst = 0.0;
    for (const std::vector<int>& kernels : {std::vector<int>{10, 4, 1}, std::vector<int>{5, 2, 1}}) {
        DecompSpec spec;
        spec.kernels = kernels;
        for (int rep = 0; rep < 25; ++rep) {
            const int batch = 1 + static_cast<int>(rng.next_below(4));
            const int series = 1 + static_cast<int>(rng.next_below(4));
            const int lookback = 2 + static_cast<int>(rng.next_below(30));
            auto x = random_vec(rng, static_cast<std::size_t>(batch) * series * lookback, -10, 10);
            auto comps = decompose(x, batch, series, lookback, spec);
            for (std::size_t i = 0; i < x.size(); ++i) {
                double sum = 0.0;
                for (const auto& c : comps) sum += c[i];
                worst = std::max(worst, std::abs(sum - x[i]));
            }
        }
    }
    std::snprintf(buf, sizeof(buf), "max |sum - input| %.3g over 50 inputs (tol 1e-12)", worst);
    report("decomposition identity", worst <= 1e-12, buf);
}

void criterion_norm_and_maps() {
    Rng rng(737373, "acceptance-norm");
    double worst_norm = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        const int batch = 1 + static_cast<int>(rng.next_below(5));
        const int series = 1 + static_cast<int>(rng.next_below(4));
        const int lookback = 2 + static_cast<int>(rng.next_below(20));
        NormParams p;
        p.alpha.resize(series);
        p.beta.resize(series);
        for (int k = 0; k < series; ++k) {
            p.alpha[k] = rng.uniform(0.2, 2.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            p.beta[k] = rng.uniform(-1.0, 1.0);
        }
        auto x = random_vec(rng, static_cast<std::size_t>(batch) * series * lookback, -5, 5);
        NormStats stats;
        auto xt = instance_normalize(x, batch, series, lookback, p, stats);
        auto back = instance_denormalize(xt, batch, series, lookback, p, stats);
        for (std::size_t i = 0; i < x.size(); ++i)
            worst_norm = std::max(worst_norm,
                                  std::abs(back[i] - x[i]) / std::max(1.0, std::abs(x[i])));
    }
    std::snprintf(buf, sizeof(buf), "max rel err %.3g (tol 1e-9)", worst_norm);
    report("normalization round trip", worst_norm <= 1e-9, buf);

    double worst_map = 0.0;
    const Variant variants[] = {Variant::vanilla, Variant::mapped, Variant::decomposed};
    for (int rep = 0; rep < 50; ++rep) {
        const Variant v = variants[rep % 3];
        ModelDims dims{1 + static_cast<int>(rng.next_below(3)),
                       2 + static_cast<int>(rng.next_below(5)),
                       1 + static_cast<int>(rng.next_below(3))};
        NfclModel m = random_model(rng, v, dims, {4}, {2, 1});
        auto x = random_vec(rng, static_cast<std::size_t>(dims.input_points()));
        const int k = static_cast<int>(rng.next_below(dims.series));
        const int t = static_cast<int>(rng.next_below(dims.horizon));
        const double want = normalized_prediction(m, x, k, t);
        const double got = contribution(m, x, k, t).total();
        worst_map = std::max(worst_map, std::abs(got - want) / std::max(1.0, std::abs(want)));
    }
    std::snprintf(buf, sizeof(buf), "max rel err %.3g over 50 draws (tol 1e-9)", worst_map);
    report("contribution faithfulness", worst_map <= 1e-9, buf);
}

void criterion_metric_oracles() {
    const bool ok = mae({1, 2}, {2, 4}) == 1.5 && mse({1, 2}, {2, 4}) == 2.5 &&
                    smape({-1}, {1}) == 100.0 && r2({1, 2, 3}, {1, 2, 2}, 1, 1) == 0.5;
    std::snprintf(buf, sizeof(buf), "mae %.2f mse %.2f smape %.0f r2 %.2f", mae({1, 2}, {2, 4}),
                  mse({1, 2}, {2, 4}), smape({-1}, {1}), r2({1, 2, 3}, {1, 2, 2}, 1, 1));
    report("metric oracles (1.5 / 2.5 / 100 / 0.5)", ok, buf);
}

void criterion_synthetic_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    const double sigma = 0.01;
    WindowBatch data = synthetic_linear(2000, 4, 24, 6, sigma, 20240518);
    WindowBatch tr = take(data, 0, 1200), va = take(data, 1200, 1600), te = take(data, 1600, 2000);

    NfclModel m = init_model(Variant::vanilla, {4, 24, 6}, {}, {}, 1);
    TrainConfig cfg;
    cfg.lr = 0.003;
    cfg.weight_decay = 0.0; // pure recovery of the generator
    cfg.batch_size = 128;
    cfg.patience = 60;
    cfg.max_epochs = 800;
    cfg.seed = 1;
    auto result = train(m, tr, va, cfg);

    std::vector<double> pred = predict_batch(result.model, te);
    const double test_mse = mse(te.y, pred);
    const double test_r2 = r2(te.y, pred, te.series, te.horizon);
    const double dt = seconds_since(t0);
    std::snprintf(buf, sizeof(buf), "test MSE %.3g (tol 3e-4), R2 %.4f (min 0.99), %.1fs < 120s",
                  test_mse, test_r2, dt);
    report("synthetic linear recovery", test_mse <= 3e-4 && test_r2 >= 0.99 && dt < 120.0, buf);
}

void criterion_determinism() {
    namespace fs = std::filesystem;
    WindowBatch data = synthetic_linear(120, 2, 8, 2, 0.05, 99);
    WindowBatch tr = take(data, 0, 80), va = take(data, 80, 100), te = take(data, 100, 120);
    TrainConfig cfg;
    cfg.max_epochs = 6;
    cfg.patience = 6;
    cfg.batch_size = 16;
    cfg.seed = 3;
    cfg.deterministic = true;

    auto run_once = [&](const std::string& tag) {
        NfclModel m = init_model(Variant::mapped, {2, 8, 2}, {4}, {}, 3);
        auto result = train(m, tr, va, cfg);
        const std::string ckpt =
            (fs::temp_directory_path() / ("nfcl_acc_det_" + tag + ".json")).string();
        save_checkpoint(result.model, ckpt);
        std::vector<double> pred = predict_batch(result.model, te);
        MetricsReport rep = compute_metrics(te.y, pred, te.count, te.series, te.horizon);
        return std::make_pair(slurp(ckpt), metrics_csv_row(rep));
    };
    auto [ckpt_a, csv_a] = run_once("a");
    auto [ckpt_b, csv_b] = run_once("b");
    const bool pass = ckpt_a == ckpt_b && csv_a == csv_b && !ckpt_a.empty();
    report("determinism (checkpoints and metric rows)", pass,
           pass ? "byte-identical across two runs" : "runs differ");
}

void criterion_etth1_soft() {
    const char* path = std::getenv("NFCL_ETTH1_CSV");
    if (!path || !*path) {
        std::printf("[SKIP] %-42s set NFCL_ETTH1_CSV to run the real-data benchmark\n",
                    "ETTh1 benchmark (soft)");
        return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    PreparedData data = prepare_data(path, std::string("date"), SplitSpec{}, 24, 6);
    TrainConfig cfg;
    cfg.batch_size = 128;
    cfg.patience = 100;
    cfg.max_epochs = 1000;
    const char* threads_env = std::getenv("NFCL_THREADS");
    cfg.threads = threads_env ? std::max(1, std::atoi(threads_env)) : 4;

    std::vector<double> maes, mses;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        cfg.seed = seed;
        NfclModel m = init_model(Variant::mapped, {data.raw.series, 24, 6}, {32}, {}, seed);
        auto result = train(m, data.train_windows, data.val_windows, cfg);
        std::vector<double> pred = predict_batch(result.model, data.test_windows, cfg.threads);
        maes.push_back(mae(data.test_windows.y, pred));
        mses.push_back(mse(data.test_windows.y, pred));
        std::printf("       seed %llu: test MAE %.4f MSE %.4f (%d epochs)\n",
                    static_cast<unsigned long long>(seed), maes.back(), mses.back(),
                    result.report.stopped_epoch);
    }
    double mean_mae = 0, mean_mse = 0;
    for (std::size_t i = 0; i < maes.size(); ++i) {
        mean_mae += maes[i];
        mean_mse += mses[i];
    }
    mean_mae /= static_cast<double>(maes.size());
    mean_mse /= static_cast<double>(mses.size());
    const bool in_range = std::abs(mean_mae - 0.368) <= 0.02 && std::abs(mean_mse - 0.319) <= 0.03;
    std::snprintf(buf, sizeof(buf),
                  "mean MAE %.4f (target 0.368+/-0.02), mean MSE %.4f (target 0.319+/-0.03), %.0fs",
                  mean_mae, mean_mse, seconds_since(t0));
    // Soft criterion: reported but never fails the suite.
    std::printf("[%s] %-42s %s\n", in_range ? "PASS" : "WARN", "ETTh1 benchmark (soft)", buf);
}

} // namespace

int main() {
    criterion_parameter_counts();
    criterion_gradients();
    criterion_grouped_equivalence();
    criterion_decomposition();
    criterion_norm_and_maps();
    criterion_metric_oracles();
    criterion_synthetic_recovery();
    criterion_determinism();
    criterion_etth1_soft();
    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all hard criteria passed\n");
    return 0;
}
