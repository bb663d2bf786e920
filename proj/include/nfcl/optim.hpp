#ifndef NFCL_OPTIM_HPP
#define NFCL_OPTIM_HPP

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nfcl/backward.hpp"
#include "nfcl/dataset.hpp"
#include "nfcl/model.hpp"
#include "nfcl/rng.hpp"

namespace nfcl {

struct TrainConfig {
    double lr = 0.001;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 128;
    int patience = 100;
    int max_epochs = 1000;
    std::uint64_t seed = 1;
    bool shuffle = true;
    bool deterministic = true;
    int threads = 1;

    void validate() const {
        if (lr <= 0.0) throw std::invalid_argument("lr must be > 0");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
            throw std::invalid_argument("betas must lie in [0,1)");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (patience < 1) throw std::invalid_argument("patience must be >= 1");
        if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
        if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    }
};

/// First/second moment estimates, one slot per parameter tensor.
struct AdamWState {
    std::vector<std::vector<double>> m, v;
    long long step = 0;
};

inline AdamWState make_adamw_state(const std::vector<ParamRef>& refs) {
    AdamWState st;
    st.m.reserve(refs.size());
    st.v.reserve(refs.size());
    for (const auto& r : refs) {
        st.m.emplace_back(r.size, 0.0);
        st.v.emplace_back(r.size, 0.0);
    }
    return st;
}

/// Decoupled-decay AdamW update. Decay applies only to slots flagged decay
/// (dense and mapping weights), never to biases or norm affine parameters.
/// Slots with clamp_abs_min are pushed away from zero after the update.
inline void adamw_step(std::vector<ParamRef>& refs, const GradientSet& grads, AdamWState& state,
                       const TrainConfig& cfg) {
    if (refs.size() != grads.slots.size())
        throw std::invalid_argument("adamw_step: gradient/parameter slot mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t s = 0; s < refs.size(); ++s) {
        ParamRef& r = refs[s];
        const std::vector<double>& g = grads.slots[s];
        if (g.size() != r.size) throw std::invalid_argument("adamw_step: slot size mismatch");
        std::vector<double>& m = state.m[s];
        std::vector<double>& v = state.v[s];
        for (std::size_t i = 0; i < r.size; ++i) {
            const double gi = g[i];
            if (!std::isfinite(gi)) throw DivergedError("adamw_step: non-finite gradient");
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            double theta = r.data[i];
            double next = theta - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            if (r.decay) next -= cfg.lr * cfg.weight_decay * theta;
            if (r.clamp_abs_min > 0.0 && std::abs(next) < r.clamp_abs_min)
                next = next < 0.0 ? -r.clamp_abs_min : r.clamp_abs_min;
            r.data[i] = next;
        }
    }
}

/// MSE of model predictions over a whole window batch. Chunks join in a
/// fixed order, so the result does not depend on scheduling.
template <typename ModelT>
double batch_mse(const ModelT& m, const WindowBatch& wb, int threads = 1) {
    if (wb.count < 1) throw std::invalid_argument("batch_mse: empty batch");
    const std::size_t xs = static_cast<std::size_t>(wb.series) * wb.lookback;
    const std::size_t ys = static_cast<std::size_t>(wb.series) * wb.horizon;
    threads = std::max(1, std::min(threads, wb.count));
    const int chunk = (wb.count + threads - 1) / threads;
    std::vector<double> sse(threads, 0.0);
    auto run = [&](int t) {
        const int lo = t * chunk;
        const int hi = std::min(wb.count, lo + chunk);
        if (lo >= hi) return;
        std::vector<double> xc(wb.x.begin() + lo * xs, wb.x.begin() + hi * xs);
        std::vector<double> pred = predict(m, xc, hi - lo);
        double acc = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred[i] - wb.y[lo * ys + i];
            acc += d * d;
        }
        sse[t] = acc;
    };
    if (threads == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(run, t);
        for (auto& th : pool) th.join();
    }
    double total = 0.0;
    for (double s : sse) total += s;
    return total / (static_cast<double>(wb.count) * ys);
}

/// Predictions for a whole window batch, chunked the same way.
template <typename ModelT>
std::vector<double> predict_batch(const ModelT& m, const WindowBatch& wb, int threads = 1) {
    const std::size_t xs = static_cast<std::size_t>(wb.series) * wb.lookback;
    const std::size_t ys = static_cast<std::size_t>(wb.series) * wb.horizon;
    std::vector<double> out(static_cast<std::size_t>(wb.count) * ys);
    threads = std::max(1, std::min(threads, wb.count));
    const int chunk = (wb.count + threads - 1) / threads;
    auto run = [&](int t) {
        const int lo = t * chunk;
        const int hi = std::min(wb.count, lo + chunk);
        if (lo >= hi) return;
        std::vector<double> xc(wb.x.begin() + lo * xs, wb.x.begin() + hi * xs);
        std::vector<double> pred = predict(m, xc, hi - lo);
        std::copy(pred.begin(), pred.end(), out.begin() + lo * ys);
    };
    if (threads == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(run, t);
        for (auto& th : pool) th.join();
    }
    return out;
}

struct TrainReport {
    std::vector<double> train_loss; // per epoch, MSE over the epoch's batches
    std::vector<double> val_loss;   // per epoch, full-validation MSE
    int best_epoch = 0;             // 1-based, 0 when no epoch finished
    double best_val = std::numeric_limits<double>::infinity();
    int stopped_epoch = 0;
    double wall_seconds = 0.0;
    bool diverged = false;
};

inline void write_report_csv(const TrainReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << "epoch,train_mse,val_mse\n";
    char buf[128];
    for (std::size_t e = 0; e < rep.train_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e + 1, rep.train_loss[e],
                      e < rep.val_loss.size() ? rep.val_loss[e] : std::numeric_limits<double>::quiet_NaN());
        out << buf;
    }
}

template <typename ModelT>
struct TrainResult {
    ModelT model; // deep copy of the best-validation epoch
    TrainReport report;
};

/// Seeded mini-batch AdamW loop with early stopping on validation MSE.
/// Stops after `patience` epochs without strict improvement, restores the
/// best-epoch parameters. A diverged (non-finite) loss aborts with the
/// report collected so far.
template <typename ModelT>
TrainResult<ModelT> train(const ModelT& initial, const WindowBatch& train_data,
                          const WindowBatch& val_data, const TrainConfig& cfg) {
    cfg.validate();
    if (train_data.count < 1 || val_data.count < 1)
        throw std::invalid_argument("train: empty train or validation windows");

    const auto t0 = std::chrono::steady_clock::now();
    ModelT model = initial;
    std::vector<ParamRef> refs = param_refs(model);
    AdamWState state = make_adamw_state(refs);
    Rng shuffle_rng(cfg.seed, "shuffle");

    ModelT best = model;
    TrainReport rep;
    int since_improve = 0;
    const std::size_t y_per_sample = static_cast<std::size_t>(train_data.series) * train_data.horizon;

    std::vector<int> order(train_data.count);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (cfg.shuffle) shuffle_rng.shuffle(order);
        double sse = 0.0;
        std::size_t elems = 0;
        bool diverged = false;
        for (int s = 0; s < train_data.count; s += cfg.batch_size) {
            const int n = std::min(cfg.batch_size, train_data.count - s);
            std::vector<int> idx(order.begin() + s, order.begin() + s + n);
            WindowBatch bb = gather_samples(train_data, idx);
            try {
                GradientSet grads = backward(model, bb.x, bb.y, bb.count, cfg.threads);
                sse += grads.loss * static_cast<double>(bb.count) * y_per_sample;
                elems += static_cast<std::size_t>(bb.count) * y_per_sample;
                adamw_step(refs, grads, state, cfg);
            } catch (const DivergedError&) {
                diverged = true;
                break;
            }
        }
        rep.stopped_epoch = epoch;
        if (diverged) {
            rep.diverged = true;
            break;
        }
        rep.train_loss.push_back(elems ? sse / static_cast<double>(elems) : 0.0);
        const double val = batch_mse(model, val_data, cfg.threads);
        rep.val_loss.push_back(val);
        if (!std::isfinite(val)) {
            rep.diverged = true;
            break;
        }
        if (val < rep.best_val) {
            rep.best_val = val;
            rep.best_epoch = epoch;
            best = model;
            since_improve = 0;
        } else if (++since_improve >= cfg.patience) {
            break;
        }
    }

    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {rep.best_epoch > 0 ? std::move(best) : std::move(model), std::move(rep)};
}

} // namespace nfcl

#endif // NFCL_OPTIM_HPP
