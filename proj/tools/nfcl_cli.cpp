// Command-line front end: train / evaluate / predict / explain / verify /
// inspect over CSV time-series.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "nfcl/nfcl.hpp"

namespace fs = std::filesystem;

namespace {

struct RunConfig {
    std::string data_path;
    std::string date_col = "date";
    int lookback = 24;
    int horizon = 6;
    std::string model = "c";
    std::vector<int> hidden{32};
    std::vector<int> kernels{10, 4, 1};
    bool zero_pad = false;
    double leaky_slope = 0.01;
    int dlinear_kernel = 25;
    double train_frac = 0.6, val_frac = 0.2, test_frac = 0.2;
    nfcl::TrainConfig train;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "runs/latest";
};

void add_data_options(CLI::App* cmd, RunConfig& cfg, bool required_data = true) {
    auto* opt = cmd->add_option("--data", cfg.data_path, "input CSV (header row required)");
    if (required_data) opt->required();
    cmd->add_option("--date-col", cfg.date_col,
                    "name of the date column to exclude (empty string keeps all columns)")
        ->capture_default_str();
    cmd->add_option("--train-frac", cfg.train_frac, "train fraction")->capture_default_str();
    cmd->add_option("--val-frac", cfg.val_frac, "validation fraction")->capture_default_str();
    cmd->add_option("--test-frac", cfg.test_frac, "test fraction")->capture_default_str();
    cmd->add_option("--lookback,-L", cfg.lookback, "history length per window")->capture_default_str();
    cmd->add_option("--horizon,-T", cfg.horizon, "forecast length per window")->capture_default_str();
}

void add_model_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--model", cfg.model, "model kind: v, c, d, nlinear, dlinear")
        ->check(CLI::IsMember({"v", "c", "d", "nlinear", "dlinear"}))
        ->capture_default_str();
    cmd->add_option("--hidden", cfg.hidden, "hidden widths of each point network")
        ->capture_default_str();
    cmd->add_option("--kernels", cfg.kernels, "decomposition kernel sizes, strictly decreasing to 1")
        ->capture_default_str();
    cmd->add_flag("--zero-pad", cfg.zero_pad, "zero left padding in decomposition (default replicate)");
    cmd->add_option("--leaky-slope", cfg.leaky_slope, "negative-side slope of the activation")
        ->capture_default_str();
    cmd->add_option("--dlinear-kernel", cfg.dlinear_kernel, "moving-average kernel for dlinear")
        ->capture_default_str();
}

void add_train_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--lr", cfg.train.lr, "learning rate")->capture_default_str();
    cmd->add_option("--weight-decay", cfg.train.weight_decay, "decoupled weight decay")
        ->capture_default_str();
    cmd->add_option("--batch-size", cfg.train.batch_size, "mini-batch size")->capture_default_str();
    cmd->add_option("--patience", cfg.train.patience, "early-stopping patience in epochs")
        ->capture_default_str();
    cmd->add_option("--max-epochs", cfg.train.max_epochs, "epoch cap")->capture_default_str();
    cmd->add_option("--seeds", cfg.seeds, "seeds, one training run each")->capture_default_str();
    cmd->add_flag("!--no-shuffle", cfg.train.shuffle, "disable epoch shuffling");
    cmd->add_flag("!--no-deterministic", cfg.train.deterministic,
                  "allow nondeterministic execution");
    cmd->add_option("--threads", cfg.train.threads, "worker threads for batch evaluation")
        ->capture_default_str();
    cmd->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
}

std::optional<std::string> date_col_of(const RunConfig& cfg) {
    if (cfg.date_col.empty()) return std::nullopt;
    return cfg.date_col;
}

nfcl::PreparedData prepare(const RunConfig& cfg) {
    try {
        nfcl::SplitSpec split{cfg.train_frac, cfg.val_frac, cfg.test_frac};
        nfcl::PreparedData data =
            nfcl::prepare_data(cfg.data_path, date_col_of(cfg), split, cfg.lookback, cfg.horizon);
        for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
        return data;
    } catch (const std::exception& e) {
        throw std::runtime_error("data stage: " + std::string(e.what()));
    }
}

nfcl::AnyModel build_model(const RunConfig& cfg, int series, std::uint64_t seed) {
    nfcl::ModelDims dims{series, cfg.lookback, cfg.horizon};
    if (cfg.model == "nlinear") return nfcl::init_nlinear(dims, seed);
    if (cfg.model == "dlinear") return nfcl::init_dlinear(dims, cfg.dlinear_kernel, seed);
    nfcl::DecompSpec spec;
    spec.kernels = cfg.kernels;
    spec.padding = cfg.zero_pad ? nfcl::PadMode::zero : nfcl::PadMode::replicate;
    return nfcl::init_model(nfcl::variant_from_tag(cfg.model), dims,
                            cfg.model == "v" ? std::vector<int>{} : cfg.hidden, spec, seed,
                            cfg.leaky_slope);
}

void check_dims(const nfcl::AnyModel& model, const nfcl::PreparedData& data, const RunConfig& cfg) {
    const nfcl::ModelDims dims = nfcl::model_dims(model);
    if (dims.series != data.raw.series || dims.lookback != cfg.lookback ||
        dims.horizon != cfg.horizon)
        throw std::runtime_error(
            "checkpoint/data mismatch: checkpoint has K=" + std::to_string(dims.series) +
            " L=" + std::to_string(dims.lookback) + " T=" + std::to_string(dims.horizon) +
            ", dataset provides K=" + std::to_string(data.raw.series) +
            " with requested L=" + std::to_string(cfg.lookback) +
            " T=" + std::to_string(cfg.horizon));
}

int cmd_train(const RunConfig& cfg, CLI::App* cmd) {
    nfcl::PreparedData data = prepare(cfg);
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream out(fs::path(cfg.out_dir) / "config.toml");
        out << cmd->config_to_str(true, true);
    }

    std::vector<double> best_vals;
    for (std::uint64_t seed : cfg.seeds) {
        nfcl::TrainConfig tc = cfg.train;
        tc.seed = seed;
        nfcl::AnyModel model = build_model(cfg, data.raw.series, seed);
        const fs::path seed_dir = fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed));
        fs::create_directories(seed_dir);

        double best_val = 0.0;
        std::visit(
            [&](auto& m) {
                auto result = nfcl::train(m, data.train_windows, data.val_windows, tc);
                nfcl::save_checkpoint(result.model, (seed_dir / "checkpoint.json").string());
                nfcl::write_report_csv(result.report, (seed_dir / "train_report.csv").string());
                best_val = result.report.best_val;
                if (result.report.diverged)
                    std::cerr << "warning: seed " << seed << " diverged at epoch "
                              << result.report.stopped_epoch << "\n";
                std::printf("seed %llu: best val MSE %.6f (epoch %d of %d, %.1fs)\n",
                            static_cast<unsigned long long>(seed), result.report.best_val,
                            result.report.best_epoch, result.report.stopped_epoch,
                            result.report.wall_seconds);
            },
            model);
        best_vals.push_back(best_val);
    }

    if (best_vals.size() > 1) {
        double mean = 0.0;
        for (double v : best_vals) mean += v;
        mean /= static_cast<double>(best_vals.size());
        double var = 0.0;
        for (double v : best_vals) var += (v - mean) * (v - mean);
        var /= static_cast<double>(best_vals.size());
        std::printf("val MSE over %zu seeds: %.6f +/- %.6f\n", best_vals.size(), mean,
                    std::sqrt(var));
    }
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& metrics_out) {
    nfcl::AnyModel model = nfcl::load_checkpoint(checkpoint_path);
    nfcl::PreparedData data = prepare(cfg);
    check_dims(model, data, cfg);

    const nfcl::WindowBatch& test = data.test_windows;
    std::vector<double> pred = std::visit(
        [&](const auto& m) { return nfcl::predict_batch(m, test, cfg.train.threads); }, model);
    nfcl::MetricsReport rep =
        nfcl::compute_metrics(test.y, pred, test.count, test.series, test.horizon);
    std::printf("%s", nfcl::metrics_table(rep).c_str());
    if (!metrics_out.empty()) {
        std::ofstream out(metrics_out);
        if (!out) throw std::runtime_error("cannot write metrics: " + metrics_out);
        out << nfcl::metrics_csv_header() << "\n" << nfcl::metrics_csv_row(rep) << "\n";
    }
    return 0;
}

int cmd_predict(const RunConfig& cfg, const std::string& checkpoint_path, int sample,
                bool scaled_units, const std::string& out_path) {
    nfcl::AnyModel model = nfcl::load_checkpoint(checkpoint_path);
    nfcl::PreparedData data = prepare(cfg);
    check_dims(model, data, cfg);

    const nfcl::WindowBatch& test = data.test_windows;
    if (sample < 0 || sample >= test.count)
        throw std::runtime_error("sample index " + std::to_string(sample) +
                                 " out of range (test split has " + std::to_string(test.count) +
                                 " windows)");
    nfcl::WindowBatch one = nfcl::gather_samples(test, {sample});
    std::vector<double> pred =
        std::visit([&](const auto& m) { return nfcl::predict(m, one.x, 1); }, model);

    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write predictions: " + out_path);
        os = &file;
    }
    *os << "series";
    for (int t = 0; t < test.horizon; ++t) *os << ",t+" << (t + 1);
    *os << "\n";
    char buf[64];
    for (int k = 0; k < test.series; ++k) {
        *os << data.raw.names[k];
        for (int t = 0; t < test.horizon; ++t) {
            double v = pred[static_cast<std::size_t>(k) * test.horizon + t];
            if (!scaled_units) v = v * data.scale.stdev[k] + data.scale.mean[k];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            *os << "," << buf;
        }
        *os << "\n";
    }
    return 0;
}

int cmd_explain(const RunConfig& cfg, const std::string& checkpoint_path, int sample, int series,
                int step, bool all_targets, const std::vector<std::string>& formats, bool raw_units,
                bool check, const std::string& out_dir) {
    nfcl::AnyModel any = nfcl::load_checkpoint(checkpoint_path);
    if (!std::holds_alternative<nfcl::NfclModel>(any))
        throw std::runtime_error("explain supports nfcl checkpoints (v/c/d), not " +
                                 nfcl::model_kind(any));
    const nfcl::NfclModel& model = std::get<nfcl::NfclModel>(any);
    nfcl::PreparedData data = prepare(cfg);
    check_dims(any, data, cfg);

    const nfcl::WindowBatch& test = data.test_windows;
    if (sample < 0 || sample >= test.count)
        throw std::runtime_error("sample index " + std::to_string(sample) +
                                 " out of range (test split has " + std::to_string(test.count) +
                                 " windows)");
    nfcl::WindowBatch one = nfcl::gather_samples(test, {sample});

    fs::create_directories(out_dir);
    const std::string stem = fs::path(cfg.data_path).stem().string();
    const bool want_csv = std::find(formats.begin(), formats.end(), "csv") != formats.end();
    const bool want_pgm = std::find(formats.begin(), formats.end(), "pgm") != formats.end();

    std::vector<std::pair<int, int>> targets;
    if (all_targets) {
        for (int k = 0; k < test.series; ++k)
            for (int t = 0; t < test.horizon; ++t) targets.emplace_back(k, t);
    } else {
        targets.emplace_back(series, step);
    }

    double worst_rel = 0.0;
    for (auto [k, t] : targets) {
        nfcl::ContributionMap map = nfcl::contribution(model, one.x, k, t, raw_units);
        const std::string base = stem + "_s" + std::to_string(sample) + "_k" + std::to_string(k) +
                                 "_t" + std::to_string(t);
        if (want_csv) nfcl::export_map_csv(map, (fs::path(out_dir) / (base + ".csv")).string());
        if (want_pgm) nfcl::export_map_pgm(map, (fs::path(out_dir) / (base + ".pgm")).string());
        if (check && !raw_units) {
            const double want = nfcl::normalized_prediction(model, one.x, k, t);
            const double rel =
                std::abs(map.total() - want) / std::max(1.0, std::abs(want));
            worst_rel = std::max(worst_rel, rel);
        }
    }
    if (all_targets) {
        nfcl::FullWeightMap fm = nfcl::full_map(model, one.x);
        nfcl::export_full_map_csv(
            fm, (fs::path(out_dir) / (stem + "_s" + std::to_string(sample) + "_full.csv")).string());
    }
    if (check) {
        std::printf("faithfulness: max relative error %.3g\n", worst_rel);
        if (worst_rel > 1e-9) {
            std::fprintf(stderr, "error: contribution maps do not reproduce the prediction\n");
            return 1;
        }
    }
    return 0;
}

int cmd_verify() {
    std::vector<nfcl::CheckResult> results = nfcl::run_verification();
    bool all_pass = true;
    for (const auto& r : results) {
        std::printf("[%s] %-46s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        all_pass = all_pass && r.pass;
    }
    std::printf("%s\n", all_pass ? "all checks passed" : "SOME CHECKS FAILED");
    return all_pass ? 0 : 1;
}

int cmd_inspect(const std::string& checkpoint_path) {
    nfcl::AnyModel model = nfcl::load_checkpoint(checkpoint_path);
    const nfcl::ModelDims dims = nfcl::model_dims(model);
    std::printf("model      %s\n", nfcl::model_kind(model).c_str());
    std::printf("dims       K=%d L=%d T=%d\n", dims.series, dims.lookback, dims.horizon);
    std::printf("parameters %lld\n", nfcl::parameter_count(model));
    if (const auto* m = std::get_if<nfcl::NfclModel>(&model)) {
        if (!m->hidden.empty()) {
            std::printf("hidden    ");
            for (int h : m->hidden) std::printf(" %d", h);
            std::printf("\n");
        }
        if (m->variant == nfcl::Variant::decomposed) {
            std::printf("kernels   ");
            for (int k : m->decomp.kernels) std::printf(" %d", k);
            std::printf("  padding %s\n",
                        m->decomp.padding == nfcl::PadMode::replicate ? "replicate" : "zero");
        }
        std::printf("seed       %llu\n", static_cast<unsigned long long>(m->seed));
        std::printf("cores      %zu\n", m->cores.size());
    } else {
        std::visit([](const auto& m) {
            std::printf("seed       %llu\n", static_cast<unsigned long long>(m.seed));
        }, model);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"NFCL forecasting toolkit"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string checkpoint_path, metrics_out, predict_out, explain_out = "maps";
    int sample = 0, target_series = 0, target_step = 0;
    bool all_targets = false, scaled_units = false, raw_units = false, check_maps = false;
    std::vector<std::string> formats{"csv", "pgm"};

    CLI::App* train = app.add_subcommand("train", "train one model per seed");
    train->set_config("--config", "", "read options from a TOML/INI file");
    add_data_options(train, cfg);
    add_model_options(train, cfg);
    add_train_options(train, cfg);

    CLI::App* evaluate = app.add_subcommand("evaluate", "metrics on the test split (scaled space)");
    evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    add_data_options(evaluate, cfg);
    evaluate->add_option("--out", metrics_out, "metrics CSV path");
    evaluate->add_option("--threads", cfg.train.threads, "worker threads")->capture_default_str();

    CLI::App* predict = app.add_subcommand("predict", "forecast one test window");
    predict->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    add_data_options(predict, cfg);
    predict->add_option("--sample", sample, "test window index")->capture_default_str();
    predict->add_flag("--scaled", scaled_units, "emit scaled-space values (default: original units)");
    predict->add_option("--out", predict_out, "write CSV here instead of stdout");

    CLI::App* explain = app.add_subcommand("explain", "export contribution maps");
    explain->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    add_data_options(explain, cfg);
    explain->add_option("--sample", sample, "test window index")->capture_default_str();
    explain->add_option("--series,-k", target_series, "target series index")->capture_default_str();
    explain->add_option("--step,-t", target_step, "target horizon step")->capture_default_str();
    explain->add_flag("--all", all_targets, "export every (series, step) target plus the full map");
    explain->add_option("--format", formats, "csv and/or pgm")->capture_default_str();
    explain->add_flag("--raw-units", raw_units, "rescale contributions to original units");
    explain->add_flag("--check", check_maps, "re-verify map totals against the prediction");
    explain->add_option("--out", explain_out, "output directory")->capture_default_str();

    app.add_subcommand("verify", "run the built-in verification battery");

    CLI::App* inspect = app.add_subcommand("inspect", "summarize a checkpoint");
    inspect->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(cfg, train);
        if (evaluate->parsed()) return cmd_evaluate(cfg, checkpoint_path, metrics_out);
        if (predict->parsed()) return cmd_predict(cfg, checkpoint_path, sample, scaled_units, predict_out);
        if (explain->parsed())
            return cmd_explain(cfg, checkpoint_path, sample, target_series, target_step,
                               all_targets, formats, raw_units, check_maps, explain_out);
        if (app.get_subcommand("verify")->parsed()) return cmd_verify();
        if (inspect->parsed()) return cmd_inspect(checkpoint_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
