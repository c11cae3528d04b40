#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ganlab/csv.hpp"
#include "ganlab/ensemble.hpp"
#include "ganlab/errors.hpp"
#include "ganlab/gan.hpp"
#include "ganlab/mlp.hpp"

namespace ganlab {

inline constexpr const char* kCheckpointFormat = "ganlab.checkpoint";
inline constexpr const char* kEnsembleFormat = "ganlab.ensemble";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string activation_name(const Activation& a) {
    switch (a.kind) {
        case Activation::Kind::identity: return "identity";
        case Activation::Kind::relu: return "relu";
        case Activation::Kind::leaky_relu: return "leaky_relu";
        case Activation::Kind::sigmoid: return "sigmoid";
    }
    throw ContractError("unknown activation kind");
}

inline Activation activation_from_name(const std::string& name, double slope) {
    if (name == "identity") return Activation::identity();
    if (name == "relu") return Activation::relu();
    if (name == "leaky_relu") return Activation::leaky_relu(slope);
    if (name == "sigmoid") return Activation::sigmoid();
    throw IoError("checkpoint: unknown activation '" + name + "'");
}

inline nlohmann::json mlp_to_json(const MlpParams& params) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : params.layers) {
        nlohmann::json j;
        j["in"] = layer.weight.cols();
        j["out"] = layer.weight.rows();
        j["activation"] = activation_name(layer.activation);
        if (layer.activation.kind == Activation::Kind::leaky_relu)
            j["slope"] = layer.activation.slope;
        j["weight"] = std::vector<double>(layer.weight.data(),
                                          layer.weight.data() + layer.weight.size());
        j["bias"] = layer.bias;
        layers.push_back(std::move(j));
    }
    return layers;
}

template <typename Json>
const Json& require_field(const Json& j, const char* field, const std::string& where) {
    if (!j.contains(field))
        throw IoError(where + ": missing field '" + field + "'");
    return j.at(field);
}

inline MlpParams mlp_from_json(const nlohmann::json& layers, const std::string& where) {
    if (!layers.is_array() || layers.empty())
        throw IoError(where + ": field 'layers' must be a non-empty array");
    MlpParams params;
    std::size_t index = 0;
    for (const auto& j : layers) {
        const std::string ctx = where + " layer " + std::to_string(index);
        const std::size_t in = require_field(j, "in", ctx).template get<std::size_t>();
        const std::size_t out = require_field(j, "out", ctx).template get<std::size_t>();
        const double slope = j.contains("slope") ? j.at("slope").template get<double>() : 0.2;
        Layer layer;
        layer.activation = activation_from_name(
            require_field(j, "activation", ctx).template get<std::string>(), slope);
        const auto w = require_field(j, "weight", ctx).template get<std::vector<double>>();
        if (w.size() != in * out)
            throw IoError(ctx + ": field 'weight' has " + std::to_string(w.size()) +
                          " values, expected " + std::to_string(in * out));
        layer.weight = Matrix(out, in);
        std::copy(w.begin(), w.end(), layer.weight.data());
        layer.bias = require_field(j, "bias", ctx).template get<std::vector<double>>();
        if (layer.bias.size() != out)
            throw IoError(ctx + ": field 'bias' has " + std::to_string(layer.bias.size()) +
                          " values, expected " + std::to_string(out));
        params.layers.push_back(std::move(layer));
        ++index;
    }
    try {
        params.validate();
    } catch (const Error& e) {
        throw IoError(where + ": invalid network: " + e.what());
    }
    return params;
}

inline nlohmann::json read_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open ") + what + ": " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("cannot parse ") + what + " " + path + ": " + e.what());
    }
    return j;
}

inline void check_header(const nlohmann::json& j, const char* format, const std::string& path) {
    const std::string fmt =
        require_field(j, "format", path).template get<std::string>();
    if (fmt != format)
        throw IoError(path + ": format is '" + fmt + "', expected '" + format + "'");
    const int version = require_field(j, "version", path).template get<int>();
    if (version != kCheckpointVersion)
        throw IoError(path + ": unsupported version " + std::to_string(version) +
                      " (supported: " + std::to_string(kCheckpointVersion) + ")");
}

}  // namespace detail

inline void save_checkpoint(const GanModel& model, const std::string& path) {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["noise_dim"] = model.noise_dim;
    j["epochs_trained"] = model.epochs_trained;
    j["init_seed"] = model.init_seed;
    j["generator"] = detail::mlp_to_json(model.generator);
    j["discriminator"] = detail::mlp_to_json(model.discriminator);
    std::ofstream out = detail::open_out(path);
    out << j.dump(2) << "\n";
}

inline GanModel load_checkpoint(const std::string& path) {
    const nlohmann::json j = detail::read_json_file(path, "checkpoint");
    detail::check_header(j, kCheckpointFormat, path);
    GanModel model;
    model.noise_dim = detail::require_field(j, "noise_dim", path).get<std::size_t>();
    model.epochs_trained = detail::require_field(j, "epochs_trained", path).get<std::size_t>();
    model.init_seed = detail::require_field(j, "init_seed", path).get<std::uint64_t>();
    model.generator = detail::mlp_from_json(
        detail::require_field(j, "generator", path), path + ": generator");
    model.discriminator = detail::mlp_from_json(
        detail::require_field(j, "discriminator", path), path + ": discriminator");
    if (model.noise_dim != model.generator.input_dim())
        throw IoError(path + ": field 'noise_dim' (" + std::to_string(model.noise_dim) +
                      ") disagrees with generator input (" +
                      std::to_string(model.generator.input_dim()) + ")");
    return model;
}

namespace detail {

inline std::string ensemble_kind_name(EnsembleKind kind) {
    switch (kind) {
        case EnsembleKind::standard: return "standard";
        case EnsembleKind::self: return "self";
        case EnsembleKind::cascade: return "cascade";
    }
    throw ContractError("unknown ensemble kind");
}

inline EnsembleKind ensemble_kind_from_name(const std::string& name, const std::string& path) {
    if (name == "standard") return EnsembleKind::standard;
    if (name == "self") return EnsembleKind::self;
    if (name == "cascade") return EnsembleKind::cascade;
    throw IoError(path + ": unknown ensemble kind '" + name + "'");
}

inline std::string member_path(const std::string& manifest_path, std::size_t index) {
    std::filesystem::path p(manifest_path);
    std::filesystem::path stem = p.parent_path() / p.stem();
    return stem.string() + "_member_" + std::to_string(index) + ".json";
}

}  // namespace detail

/// Writes <path> (manifest) plus one checkpoint-style generator file per
/// member next to it, named <stem>_member_<i>.json.
inline void save_ensemble(const EnsembleModel& ens, const std::string& path) {
    ens.validate();
    nlohmann::json j;
    j["format"] = kEnsembleFormat;
    j["version"] = kCheckpointVersion;
    j["kind"] = detail::ensemble_kind_name(ens.kind);
    j["noise_dim"] = ens.noise_dim;
    if (!ens.stage_shares.empty()) j["stage_shares"] = ens.stage_shares;
    if (!ens.gate_thresholds.empty()) j["gate_thresholds"] = ens.gate_thresholds;
    if (!ens.stage_sizes.empty()) j["stage_sizes"] = ens.stage_sizes;
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t i = 0; i < ens.members.size(); ++i) {
        const auto& m = ens.members[i];
        const std::string mpath = detail::member_path(path, i);
        nlohmann::json mj;
        mj["path"] = std::filesystem::path(mpath).filename().string();
        mj["init_seed"] = m.init_seed;
        mj["epoch"] = m.epoch;
        mj["stage"] = m.stage;
        members.push_back(std::move(mj));

        nlohmann::json cj;
        cj["format"] = kCheckpointFormat;
        cj["version"] = kCheckpointVersion;
        cj["noise_dim"] = ens.noise_dim;
        cj["generator"] = detail::mlp_to_json(m.generator);
        std::ofstream mout = detail::open_out(mpath);
        mout << cj.dump(2) << "\n";
    }
    j["members"] = std::move(members);
    std::ofstream out = detail::open_out(path);
    out << j.dump(2) << "\n";
}

inline EnsembleModel load_ensemble(const std::string& path) {
    const nlohmann::json j = detail::read_json_file(path, "ensemble manifest");
    detail::check_header(j, kEnsembleFormat, path);
    EnsembleModel ens;
    ens.kind = detail::ensemble_kind_from_name(
        detail::require_field(j, "kind", path).get<std::string>(), path);
    ens.noise_dim = detail::require_field(j, "noise_dim", path).get<std::size_t>();
    if (j.contains("stage_shares"))
        ens.stage_shares = j.at("stage_shares").get<std::vector<double>>();
    if (j.contains("gate_thresholds"))
        ens.gate_thresholds = j.at("gate_thresholds").get<std::vector<double>>();
    if (j.contains("stage_sizes"))
        ens.stage_sizes = j.at("stage_sizes").get<std::vector<std::size_t>>();
    const auto& members = detail::require_field(j, "members", path);
    if (!members.is_array() || members.empty())
        throw IoError(path + ": field 'members' must be a non-empty array");
    const std::filesystem::path dir = std::filesystem::path(path).parent_path();
    for (const auto& mj : members) {
        const std::string ctx = path + ": member";
        EnsembleMember m;
        m.init_seed = detail::require_field(mj, "init_seed", ctx).get<std::uint64_t>();
        m.epoch = detail::require_field(mj, "epoch", ctx).get<std::size_t>();
        m.stage = detail::require_field(mj, "stage", ctx).get<std::size_t>();
        const std::string rel = detail::require_field(mj, "path", ctx).get<std::string>();
        const std::string mpath = (dir / rel).string();
        const nlohmann::json cj = detail::read_json_file(mpath, "member checkpoint");
        detail::check_header(cj, kCheckpointFormat, mpath);
        m.generator = detail::mlp_from_json(
            detail::require_field(cj, "generator", mpath), mpath + ": generator");
        ens.members.push_back(std::move(m));
    }
    ens.validate();
    return ens;
}

}  // namespace ganlab
