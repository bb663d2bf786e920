#ifndef NFCL_CHECKPOINT_HPP
#define NFCL_CHECKPOINT_HPP

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nfcl/baselines.hpp"
#include "nfcl/model.hpp"

namespace nfcl {

using AnyModel = std::variant<NfclModel, NLinearModel, DLinearModel>;

namespace detail {

inline nlohmann::json params_json(std::vector<ParamRef> refs,
                                  const std::vector<std::vector<int>>& shapes) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < refs.size(); ++i) {
        nlohmann::json t;
        t["name"] = refs[i].name;
        t["shape"] = shapes[i];
        nlohmann::json data = nlohmann::json::array();
        for (std::size_t j = 0; j < refs[i].size; ++j) {
            if (!std::isfinite(refs[i].data[j]))
                throw std::runtime_error("checkpoint: non-finite parameter in " + refs[i].name);
            data.push_back(refs[i].data[j]);
        }
        t["data"] = std::move(data);
        arr.push_back(std::move(t));
    }
    return arr;
}

inline void load_params(const nlohmann::json& arr, std::vector<ParamRef> refs) {
    if (arr.size() != refs.size())
        throw std::runtime_error("checkpoint: expected " + std::to_string(refs.size()) +
                                 " parameter tensors, found " + std::to_string(arr.size()));
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const nlohmann::json& t = arr[i];
        if (t.at("name").get<std::string>() != refs[i].name)
            throw std::runtime_error("checkpoint: tensor '" + t.at("name").get<std::string>() +
                                     "' where '" + refs[i].name + "' was expected");
        const nlohmann::json& data = t.at("data");
        if (data.size() != refs[i].size)
            throw std::runtime_error("checkpoint: tensor '" + refs[i].name + "' has " +
                                     std::to_string(data.size()) + " values, expected " +
                                     std::to_string(refs[i].size));
        for (std::size_t j = 0; j < refs[i].size; ++j) refs[i].data[j] = data[j].get<double>();
    }
}

inline std::vector<std::vector<int>> param_shapes(const NfclModel& m) {
    std::vector<std::vector<int>> shapes;
    for (const auto& core : m.cores) {
        shapes.push_back({m.dims.series});
        shapes.push_back({m.dims.series});
        if (core.has_mapping)
            for (const auto& bank : core.mapping.banks) {
                shapes.push_back({core.mapping.points, bank.out, bank.in});
                shapes.push_back({core.mapping.points, bank.out});
            }
        shapes.push_back({core.out.inputs, core.out.outputs});
        shapes.push_back({core.out.outputs});
    }
    return shapes;
}

inline nlohmann::json dims_json(const ModelDims& d) {
    return {{"series", d.series}, {"lookback", d.lookback}, {"horizon", d.horizon}};
}

inline ModelDims dims_from_json(const nlohmann::json& j) {
    ModelDims d;
    d.series = j.at("series").get<int>();
    d.lookback = j.at("lookback").get<int>();
    d.horizon = j.at("horizon").get<int>();
    return d;
}

inline void write_doc(const nlohmann::json& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << doc.dump(1) << "\n";
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

} // namespace detail

inline void save_checkpoint(const NfclModel& m, const std::string& path) {
    nlohmann::json doc;
    doc["format"] = "nfcl-checkpoint";
    doc["version"] = 1;
    doc["model"] = variant_tag(m.variant);
    doc["dims"] = detail::dims_json(m.dims);
    doc["hidden"] = m.hidden;
    doc["kernels"] = m.decomp.kernels;
    doc["padding"] = m.decomp.padding == PadMode::replicate ? "replicate" : "zero";
    doc["leaky_slope"] = m.cores.empty() || !m.cores[0].has_mapping ? 0.01 : m.cores[0].mapping.leaky_slope;
    doc["seed"] = m.seed;
    doc["params"] = detail::params_json(param_refs(const_cast<NfclModel&>(m)), detail::param_shapes(m));
    detail::write_doc(doc, path);
}

inline void save_checkpoint(const NLinearModel& m, const std::string& path) {
    nlohmann::json doc;
    doc["format"] = "nfcl-checkpoint";
    doc["version"] = 1;
    doc["model"] = "nlinear";
    doc["dims"] = detail::dims_json(m.dims);
    doc["seed"] = m.seed;
    doc["params"] = detail::params_json(
        param_refs(const_cast<NLinearModel&>(m)),
        {{m.dims.lookback, m.dims.horizon}, {m.dims.horizon}});
    detail::write_doc(doc, path);
}

inline void save_checkpoint(const DLinearModel& m, const std::string& path) {
    nlohmann::json doc;
    doc["format"] = "nfcl-checkpoint";
    doc["version"] = 1;
    doc["model"] = "dlinear";
    doc["dims"] = detail::dims_json(m.dims);
    doc["seed"] = m.seed;
    doc["kernel"] = m.kernel;
    doc["params"] = detail::params_json(
        param_refs(const_cast<DLinearModel&>(m)),
        {{m.dims.lookback, m.dims.horizon}, {m.dims.horizon},
         {m.dims.lookback, m.dims.horizon}, {m.dims.horizon}});
    detail::write_doc(doc, path);
}

inline void save_checkpoint(const AnyModel& m, const std::string& path) {
    std::visit([&](const auto& model) { save_checkpoint(model, path); }, m);
}

inline AnyModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": not a valid checkpoint: " + e.what());
    }
    if (doc.value("format", "") != "nfcl-checkpoint")
        throw std::runtime_error(path + ": not an nfcl checkpoint");

    const std::string kind = doc.at("model").get<std::string>();
    const ModelDims dims = detail::dims_from_json(doc.at("dims"));
    if (kind == "nlinear") {
        NLinearModel m = init_nlinear(dims, doc.value("seed", std::uint64_t{0}));
        detail::load_params(doc.at("params"), param_refs(m));
        return m;
    }
    if (kind == "dlinear") {
        DLinearModel m = init_dlinear(dims, doc.value("kernel", 25), doc.value("seed", std::uint64_t{0}));
        detail::load_params(doc.at("params"), param_refs(m));
        return m;
    }
    DecompSpec spec;
    spec.kernels = doc.value("kernels", std::vector<int>{10, 4, 1});
    spec.padding = doc.value("padding", std::string("replicate")) == "zero" ? PadMode::zero
                                                                            : PadMode::replicate;
    NfclModel m = init_model(variant_from_tag(kind), dims,
                             doc.value("hidden", std::vector<int>{}), spec,
                             doc.value("seed", std::uint64_t{0}), doc.value("leaky_slope", 0.01));
    detail::load_params(doc.at("params"), param_refs(m));
    return m;
}

inline ModelDims model_dims(const AnyModel& m) {
    return std::visit([](const auto& model) { return model.dims; }, m);
}

inline long long parameter_count(const AnyModel& m) {
    return std::visit([](const auto& model) { return parameter_count(model); }, m);
}

inline std::string model_kind(const AnyModel& m) {
    if (std::holds_alternative<NLinearModel>(m)) return "nlinear";
    if (std::holds_alternative<DLinearModel>(m)) return "dlinear";
    return variant_tag(std::get<NfclModel>(m).variant);
}

} // namespace nfcl

#endif // NFCL_CHECKPOINT_HPP
