#ifndef NFCL_MODEL_HPP
#define NFCL_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfcl/rng.hpp"

namespace nfcl {

struct ModelDims {
    int series = 0;   // K
    int lookback = 0; // L
    int horizon = 0;  // T

    int input_points() const { return series * lookback; }
    int output_points() const { return series * horizon; }

    void validate() const {
        if (series < 1 || lookback < 1 || horizon < 1)
            throw std::invalid_argument("model dims must all be >= 1");
    }
};

/// Dense map from all K*L input points to all K*T output points.
/// Flattening is series-major on both sides: input point (i,j) sits at row
/// i*L+j, output point (k,t) at column k*T+t.
struct OutputLayer {
    int inputs = 0;
    int outputs = 0;
    std::vector<double> w; // inputs x outputs, row-major
    std::vector<double> b; // outputs

    double weight(int in, int out) const { return w[static_cast<std::size_t>(in) * outputs + out]; }
};

/// K*L independent scalar networks 1 -> widths... -> 1, leaky-ReLU after
/// every hidden layer, linear final layer. Parameters are stored as banks so
/// one bank holds the same layer of every point's network.
struct MappingStack {
    struct Bank {
        int in = 0;
        int out = 0;
        std::vector<double> w; // points * out * in
        std::vector<double> b; // points * out
    };

    int points = 0;
    std::vector<int> widths;
    double leaky_slope = 0.01;
    std::vector<Bank> banks; // widths.size()+1 banks, last one linear

    bool empty() const { return banks.empty(); }
};

/// Learnable per-variable affine applied after window standardization.
struct NormParams {
    std::vector<double> alpha; // init 1
    std::vector<double> beta;  // init 0
};

/// Per-sample, per-variable lookback statistics kept for inversion.
struct NormStats {
    int count = 0;
    int series = 0;
    std::vector<double> mean;  // count x series
    std::vector<double> stdev; // count x series, floored at 1e-5

    double mean_at(int b, int k) const { return mean[static_cast<std::size_t>(b) * series + k]; }
    double stdev_at(int b, int k) const { return stdev[static_cast<std::size_t>(b) * series + k]; }
};

enum class PadMode { replicate, zero };

/// Moving-average kernel sizes, strictly decreasing, last element 1.
struct DecompSpec {
    std::vector<int> kernels{10, 4, 1};
    PadMode padding = PadMode::replicate;

    void validate() const {
        if (kernels.empty()) throw std::invalid_argument("decomposition needs at least one kernel");
        for (std::size_t i = 0; i < kernels.size(); ++i) {
            if (kernels[i] < 1) throw std::invalid_argument("decomposition kernels must be positive");
            if (i > 0 && kernels[i] >= kernels[i - 1])
                throw std::invalid_argument("decomposition kernels must be strictly decreasing");
        }
        if (kernels.back() != 1)
            throw std::invalid_argument("last decomposition kernel must be 1");
    }
};

enum class Variant { vanilla, mapped, decomposed };

inline std::string variant_tag(Variant v) {
    switch (v) {
        case Variant::vanilla: return "v";
        case Variant::mapped: return "c";
        case Variant::decomposed: return "d";
    }
    return "?";
}

inline Variant variant_from_tag(const std::string& s) {
    if (s == "v") return Variant::vanilla;
    if (s == "c") return Variant::mapped;
    if (s == "d") return Variant::decomposed;
    throw std::invalid_argument("unknown model variant tag: " + s);
}

/// One normalized-space forecaster: affine norm params, optional per-point
/// mapping stack, dense output layer.
struct CoreModel {
    NormParams norm;
    MappingStack mapping;
    OutputLayer out;
    bool has_mapping = false;
};

struct NfclModel {
    Variant variant = Variant::vanilla;
    ModelDims dims;
    std::vector<int> hidden;
    DecompSpec decomp;
    std::uint64_t seed = 0;
    std::vector<CoreModel> cores; // 1 for v/c, |kernels| for d
};

/// Non-owning view of one named parameter tensor.
struct ParamRef {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
    bool decay = false;          // weight decay applies
    double clamp_abs_min = 0.0;  // post-step |value| floor, 0 disables
};

namespace detail {

inline void init_output_layer(OutputLayer& layer, int inputs, int outputs, Rng& rng) {
    layer.inputs = inputs;
    layer.outputs = outputs;
    layer.w.resize(static_cast<std::size_t>(inputs) * outputs);
    layer.b.assign(static_cast<std::size_t>(outputs), 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(inputs));
    for (double& v : layer.w) v = rng.uniform(-bound, bound);
}

inline void init_mapping_stack(MappingStack& st, int points, const std::vector<int>& widths,
                               double leaky_slope, Rng& rng) {
    st.points = points;
    st.widths = widths;
    st.leaky_slope = leaky_slope;
    st.banks.clear();
    std::vector<int> sizes;
    sizes.push_back(1);
    sizes.insert(sizes.end(), widths.begin(), widths.end());
    sizes.push_back(1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        MappingStack::Bank bank;
        bank.in = sizes[l];
        bank.out = sizes[l + 1];
        bank.w.resize(static_cast<std::size_t>(points) * bank.out * bank.in);
        bank.b.assign(static_cast<std::size_t>(points) * bank.out, 0.0);
        const double bound = 1.0 / std::sqrt(static_cast<double>(bank.in));
        for (double& v : bank.w) v = rng.uniform(-bound, bound);
        st.banks.push_back(std::move(bank));
    }
}

inline void init_core(CoreModel& core, const ModelDims& dims, const std::vector<int>& hidden,
                      bool with_mapping, double leaky_slope, Rng& rng) {
    core.norm.alpha.assign(dims.series, 1.0);
    core.norm.beta.assign(dims.series, 0.0);
    core.has_mapping = with_mapping;
    if (with_mapping)
        init_mapping_stack(core.mapping, dims.input_points(), hidden, leaky_slope, rng);
    init_output_layer(core.out, dims.input_points(), dims.output_points(), rng);
}

} // namespace detail

inline NfclModel init_model(Variant variant, ModelDims dims, const std::vector<int>& hidden,
                            DecompSpec decomp = {}, std::uint64_t seed = 0,
                            double leaky_slope = 0.01) {
    dims.validate();
    const bool needs_mapping = variant != Variant::vanilla;
    if (needs_mapping) {
        if (hidden.empty())
            throw std::invalid_argument("mapped/decomposed variants need at least one hidden width");
        for (int h : hidden)
            if (h < 1) throw std::invalid_argument("hidden widths must be >= 1");
    }
    if (variant == Variant::decomposed) decomp.validate();

    NfclModel m;
    m.variant = variant;
    m.dims = dims;
    m.hidden = needs_mapping ? hidden : std::vector<int>{};
    m.decomp = decomp;
    m.seed = seed;

    Rng rng(seed, "init");
    const int n_cores = variant == Variant::decomposed ? static_cast<int>(decomp.kernels.size()) : 1;
    m.cores.resize(n_cores);
    for (CoreModel& core : m.cores)
        detail::init_core(core, dims, m.hidden, needs_mapping, leaky_slope, rng);
    return m;
}

inline long long parameter_count(const MappingStack& st) {
    long long n = 0;
    for (const auto& bank : st.banks)
        n += static_cast<long long>(bank.w.size()) + static_cast<long long>(bank.b.size());
    return n;
}

inline long long parameter_count(const CoreModel& core) {
    long long n = static_cast<long long>(core.out.w.size()) + static_cast<long long>(core.out.b.size());
    n += static_cast<long long>(core.norm.alpha.size()) + static_cast<long long>(core.norm.beta.size());
    if (core.has_mapping) n += parameter_count(core.mapping);
    return n;
}

inline long long parameter_count(const NfclModel& m) {
    long long n = 0;
    for (const auto& core : m.cores) n += parameter_count(core);
    return n;
}

inline std::vector<ParamRef> param_refs(NfclModel& m) {
    std::vector<ParamRef> refs;
    for (std::size_t c = 0; c < m.cores.size(); ++c) {
        CoreModel& core = m.cores[c];
        const std::string prefix = m.cores.size() > 1 ? "core" + std::to_string(c) + "." : "";
        refs.push_back({prefix + "alpha", core.norm.alpha.data(), core.norm.alpha.size(), false, 1e-8});
        refs.push_back({prefix + "beta", core.norm.beta.data(), core.norm.beta.size(), false, 0.0});
        if (core.has_mapping) {
            for (std::size_t l = 0; l < core.mapping.banks.size(); ++l) {
                auto& bank = core.mapping.banks[l];
                refs.push_back({prefix + "h" + std::to_string(l) + ".w", bank.w.data(), bank.w.size(), true, 0.0});
                refs.push_back({prefix + "h" + std::to_string(l) + ".b", bank.b.data(), bank.b.size(), false, 0.0});
            }
        }
        refs.push_back({prefix + "out.w", core.out.w.data(), core.out.w.size(), true, 0.0});
        refs.push_back({prefix + "out.b", core.out.b.data(), core.out.b.size(), false, 0.0});
    }
    return refs;
}

} // namespace nfcl

#endif // NFCL_MODEL_HPP
