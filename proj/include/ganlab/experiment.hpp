#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ganlab/checkpoint.hpp"
#include "ganlab/csv.hpp"
#include "ganlab/ensemble.hpp"
#include "ganlab/errors.hpp"
#include "ganlab/evaluation.hpp"
#include "ganlab/gan.hpp"
#include "ganlab/knn.hpp"
#include "ganlab/synthdata.hpp"

namespace ganlab {

inline constexpr const char* kManifestFormat = "ganlab.manifest";
inline constexpr int kArtifactVersion = 1;
inline constexpr const char* kBaselineLabel = "pdata";

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw ContractError("mean_of: empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw ContractError("median_of: empty vector");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// One generator-building recipe inside an experiment.
struct MethodSpec {
    std::string label;
    std::string kind;  // "gan" | "egan" | "segan" | "cgan"

    std::size_t members = 2;                              // egan, segan
    std::size_t stages = 2;                               // cgan
    double ratio = 0.8;                                   // cgan
    std::size_t window_lo = 30;                           // segan
    std::size_t window_hi = 40;                           // segan
    SamplingPolicy policy = SamplingPolicy::equal_split;  // egan, segan
};

/// Data-generating distribution; either a named family or an explicit mixture.
struct DistributionSpec {
    std::string kind = "ring";  // "ring" | "bimodal" | "mixture"

    std::size_t modes = 8;  // ring
    double radius = 6.0;    // ring
    double sigma = 0.3;     // ring and bimodal

    double major_weight = 0.9;  // bimodal
    double offset = 5.0;        // bimodal

    MixtureSpec mixture;  // explicit

    MixtureSpec to_mixture() const {
        if (kind == "ring") return ring_mixture(modes, radius, sigma);
        if (kind == "bimodal") return imbalanced_bimodal(major_weight, offset, sigma);
        if (kind == "mixture") return mixture;
        throw ContractError("DistributionSpec: unknown kind '" + kind + "'");
    }
};

struct ExperimentConfig {
    DistributionSpec distribution;
    std::size_t n_samples = 10000;
    SplitSpec split;
    TrainConfig train;
    std::vector<MethodSpec> methods;
    std::size_t n_generated = 10000;
    std::size_t k = 10;
    std::size_t repetitions = 10;
    double alpha = 0.05;
    std::string output_dir = "out";
    std::uint64_t master_seed = 1;

    std::vector<std::string> validation_problems() const;
    void validate() const {
        auto problems = validation_problems();
        if (!problems.empty()) throw ValidationError(std::move(problems));
    }
};

inline std::vector<std::string> ExperimentConfig::validation_problems() const {
    std::vector<std::string> out;
    auto note = [&](const std::string& msg) { out.push_back(msg); };

    if (distribution.kind != "ring" && distribution.kind != "bimodal" &&
        distribution.kind != "mixture") {
        note("distribution.kind must be one of ring, bimodal, mixture (got '" +
             distribution.kind + "')");
    } else {
        try {
            distribution.to_mixture().validate();
        } catch (const Error& e) {
            note(std::string("distribution: ") + e.what());
        }
    }
    if (n_samples < 10) note("n_samples must be at least 10");
    try {
        split.validate();
    } catch (const Error& e) {
        note(std::string("split: ") + e.what());
    }
    try {
        train.validate();
    } catch (const Error& e) {
        note(std::string("train: ") + e.what());
    }

    if (methods.empty()) note("methods must not be empty");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < methods.size(); ++i) {
        const auto& m = methods[i];
        const std::string where = "methods[" + std::to_string(i) + "]";
        if (m.label.empty()) note(where + ": label must not be empty");
        if (m.label == kBaselineLabel)
            note(where + ": label '" + std::string(kBaselineLabel) + "' is reserved");
        if (!labels.insert(m.label).second) note(where + ": duplicate label '" + m.label + "'");
        if (m.label.find_first_not_of(
                "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-") !=
            std::string::npos)
            note(where + ": label may only use [A-Za-z0-9_.-]");

        if (m.kind == "gan") {
        } else if (m.kind == "egan") {
            if (m.members < 2) note(where + ": egan needs members >= 2");
        } else if (m.kind == "segan") {
            if (m.members < 2) note(where + ": segan needs members >= 2");
            if (m.window_lo < 1) note(where + ": segan window must start at epoch >= 1");
            if (m.window_lo > m.window_hi) note(where + ": segan window lo > hi");
            if (m.window_hi - m.window_lo + 1 < m.members)
                note(where + ": segan window [" + std::to_string(m.window_lo) + "," +
                     std::to_string(m.window_hi) + "] holds fewer epochs than members");
        } else if (m.kind == "cgan") {
            if (m.stages < 2) note(where + ": cgan needs stages >= 2");
            if (!(m.ratio > 0.0 && m.ratio < 1.0)) note(where + ": cgan ratio must be in (0,1)");
        } else {
            note(where + ": unknown kind '" + m.kind + "' (expected gan, egan, segan, cgan)");
        }
        if ((m.kind == "egan" || m.kind == "segan") && n_generated < m.members)
            note(where + ": n_generated below member count");
    }

    if (k < 1) note("k must be at least 1");
    if (n_generated < k) note("n_generated must be >= k");
    if (repetitions < 1) note("repetitions must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) note("alpha must be in (0,1)");
    if (output_dir.empty()) note("output_dir must not be empty");
    return out;
}

// ---------------------------------------------------------------------------
// JSON schema (strict: unknown keys are config errors)
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& where, std::vector<std::string>& problems) {
    if (!j.is_object()) {
        problems.push_back(where + ": expected a JSON object");
        return;
    }
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known) problems.push_back(where + ": unknown key '" + item.key() + "'");
    }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where,
                std::vector<std::string>& problems) {
    if (!j.is_object() || !j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        problems.push_back(where + "." + key + ": " + e.what());
    }
}

inline GeneratorLoss parse_g_loss(const std::string& name, const std::string& where,
                                  std::vector<std::string>& problems) {
    if (name == "minimax") return GeneratorLoss::minimax;
    if (name == "non_saturating") return GeneratorLoss::non_saturating;
    problems.push_back(where + ": g_loss must be minimax or non_saturating (got '" + name + "')");
    return GeneratorLoss::non_saturating;
}

inline SamplingPolicy parse_policy(const std::string& name, const std::string& where,
                                   std::vector<std::string>& problems) {
    if (name == "equal_split") return SamplingPolicy::equal_split;
    if (name == "uniform_random") return SamplingPolicy::uniform_random;
    problems.push_back(where + ": policy must be equal_split or uniform_random (got '" + name +
                       "')");
    return SamplingPolicy::equal_split;
}

inline MixtureSpec parse_mixture(const nlohmann::json& j, const std::string& where,
                                 std::vector<std::string>& problems) {
    // Key validation happens in parse_distribution; this reads the fields.
    MixtureSpec spec;
    read_field(j, "dimension", spec.dimension, where, problems);
    if (j.contains("components") && j.at("components").is_array()) {
        std::size_t i = 0;
        for (const auto& cj : j.at("components")) {
            const std::string cw = where + ".components[" + std::to_string(i) + "]";
            check_keys(cj, {"mean", "variance", "covariance", "weight"}, cw, problems);
            MixtureComponent comp;
            read_field(cj, "mean", comp.mean, cw, problems);
            read_field(cj, "weight", comp.weight, cw, problems);
            if (cj.contains("variance") && cj.contains("covariance"))
                problems.push_back(cw + ": give variance or covariance, not both");
            if (cj.contains("variance")) {
                std::vector<double> var;
                read_field(cj, "variance", var, cw, problems);
                if (!var.empty()) comp.covariance = diagonal_covariance(var);
            } else if (cj.contains("covariance")) {
                std::vector<std::vector<double>> rows;
                read_field(cj, "covariance", rows, cw, problems);
                if (!rows.empty()) {
                    Matrix cov(rows.size(), rows.front().size());
                    bool ok = true;
                    for (std::size_t r = 0; r < rows.size(); ++r) {
                        if (rows[r].size() != cov.cols()) {
                            problems.push_back(cw + ": covariance rows have unequal widths");
                            ok = false;
                            break;
                        }
                        std::copy(rows[r].begin(), rows[r].end(), cov.row(r));
                    }
                    if (ok) comp.covariance = std::move(cov);
                }
            } else {
                problems.push_back(cw + ": needs variance or covariance");
            }
            spec.components.push_back(std::move(comp));
            ++i;
        }
    } else if (!j.contains("components")) {
        problems.push_back(where + ": missing components");
    }
    return spec;
}

inline DistributionSpec parse_distribution(const nlohmann::json& j, const std::string& where,
                                           std::vector<std::string>& problems) {
    DistributionSpec spec;
    if (!j.is_object()) {
        problems.push_back(where + ": expected a JSON object");
        return spec;
    }
    read_field(j, "kind", spec.kind, where, problems);
    if (spec.kind == "ring") {
        check_keys(j, {"kind", "modes", "radius", "sigma"}, where, problems);
        read_field(j, "modes", spec.modes, where, problems);
        read_field(j, "radius", spec.radius, where, problems);
        read_field(j, "sigma", spec.sigma, where, problems);
    } else if (spec.kind == "bimodal") {
        check_keys(j, {"kind", "major_weight", "offset", "sigma"}, where, problems);
        spec.sigma = 1.0;
        read_field(j, "major_weight", spec.major_weight, where, problems);
        read_field(j, "offset", spec.offset, where, problems);
        read_field(j, "sigma", spec.sigma, where, problems);
    } else if (spec.kind == "mixture") {
        check_keys(j, {"kind", "dimension", "components"}, where, problems);
        spec.mixture = parse_mixture(j, where, problems);
    } else {
        problems.push_back(where + ".kind: expected ring, bimodal or mixture (got '" + spec.kind +
                           "')");
    }
    return spec;
}

inline TrainConfig parse_train(const nlohmann::json& j, const std::string& where,
                               std::vector<std::string>& problems) {
    TrainConfig tc;
    check_keys(j,
               {"epochs", "batch_size", "d_steps", "g_loss", "noise_dim", "g_hidden", "d_hidden",
                "init_std", "leaky_slope", "learning_rate", "beta1", "beta2", "epsilon"},
               where, problems);
    read_field(j, "epochs", tc.epochs, where, problems);
    read_field(j, "batch_size", tc.batch_size, where, problems);
    read_field(j, "d_steps", tc.d_steps_per_g_step, where, problems);
    if (j.contains("g_loss")) {
        std::string name;
        read_field(j, "g_loss", name, where, problems);
        tc.g_loss_variant = parse_g_loss(name, where, problems);
    }
    read_field(j, "noise_dim", tc.net.noise_dim, where, problems);
    read_field(j, "g_hidden", tc.net.g_hidden, where, problems);
    read_field(j, "d_hidden", tc.net.d_hidden, where, problems);
    read_field(j, "init_std", tc.net.init_std, where, problems);
    read_field(j, "leaky_slope", tc.net.leaky_slope, where, problems);
    read_field(j, "learning_rate", tc.optimizer.learning_rate, where, problems);
    read_field(j, "beta1", tc.optimizer.beta1, where, problems);
    read_field(j, "beta2", tc.optimizer.beta2, where, problems);
    read_field(j, "epsilon", tc.optimizer.epsilon, where, problems);
    return tc;
}

inline MethodSpec parse_method(const nlohmann::json& j, const std::string& where,
                               std::vector<std::string>& problems) {
    MethodSpec m;
    if (!j.is_object()) {
        problems.push_back(where + ": expected a JSON object");
        return m;
    }
    read_field(j, "label", m.label, where, problems);
    read_field(j, "kind", m.kind, where, problems);
    if (m.kind == "gan") {
        check_keys(j, {"label", "kind"}, where, problems);
    } else if (m.kind == "egan") {
        check_keys(j, {"label", "kind", "members", "policy"}, where, problems);
        read_field(j, "members", m.members, where, problems);
    } else if (m.kind == "segan") {
        check_keys(j, {"label", "kind", "members", "window", "policy"}, where, problems);
        read_field(j, "members", m.members, where, problems);
        if (j.contains("window")) {
            std::vector<std::size_t> w;
            read_field(j, "window", w, where, problems);
            if (w.size() == 2) {
                m.window_lo = w[0];
                m.window_hi = w[1];
            } else {
                problems.push_back(where + ".window: expected [lo, hi]");
            }
        }
    } else if (m.kind == "cgan") {
        check_keys(j, {"label", "kind", "stages", "ratio"}, where, problems);
        read_field(j, "stages", m.stages, where, problems);
        read_field(j, "ratio", m.ratio, where, problems);
    } else {
        check_keys(j, {"label", "kind"}, where, problems);
        problems.push_back(where + ".kind: expected gan, egan, segan or cgan (got '" + m.kind +
                           "')");
    }
    if (j.contains("policy")) {
        std::string name;
        read_field(j, "policy", name, where, problems);
        m.policy = parse_policy(name, where, problems);
    }
    return m;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    std::vector<std::string> problems;
    ExperimentConfig cfg;
    detail::check_keys(j,
                       {"distribution", "n_samples", "split", "train", "methods", "n_generated",
                        "k", "repetitions", "alpha", "output_dir", "master_seed"},
                       "config", problems);
    if (j.is_object()) {
        if (j.contains("distribution"))
            cfg.distribution = detail::parse_distribution(j.at("distribution"),
                                                          "config.distribution", problems);
        else
            problems.push_back("config: missing distribution");

        detail::read_field(j, "n_samples", cfg.n_samples, "config", problems);
        if (j.contains("split")) {
            detail::check_keys(j.at("split"), {"train_fraction", "test_fraction"}, "config.split",
                               problems);
            detail::read_field(j.at("split"), "train_fraction", cfg.split.train_fraction,
                               "config.split", problems);
            detail::read_field(j.at("split"), "test_fraction", cfg.split.test_fraction,
                               "config.split", problems);
        }
        if (j.contains("train"))
            cfg.train = detail::parse_train(j.at("train"), "config.train", problems);
        if (j.contains("methods")) {
            if (j.at("methods").is_array()) {
                std::size_t i = 0;
                for (const auto& mj : j.at("methods")) {
                    cfg.methods.push_back(detail::parse_method(
                        mj, "config.methods[" + std::to_string(i) + "]", problems));
                    ++i;
                }
            } else {
                problems.push_back("config.methods: expected an array");
            }
        } else {
            problems.push_back("config: missing methods");
        }
        detail::read_field(j, "n_generated", cfg.n_generated, "config", problems);
        detail::read_field(j, "k", cfg.k, "config", problems);
        detail::read_field(j, "repetitions", cfg.repetitions, "config", problems);
        detail::read_field(j, "alpha", cfg.alpha, "config", problems);
        detail::read_field(j, "output_dir", cfg.output_dir, "config", problems);
        detail::read_field(j, "master_seed", cfg.master_seed, "config", problems);
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config ") + path + ": " + e.what());
    }
    return parse_experiment_config(j);
}

/// Normalized, defaults-filled echo of the config. Parsing it back yields the
/// same config, and its canonical dump is what config_hash digests.
inline nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    nlohmann::json d;
    d["kind"] = cfg.distribution.kind;
    if (cfg.distribution.kind == "ring") {
        d["modes"] = cfg.distribution.modes;
        d["radius"] = cfg.distribution.radius;
        d["sigma"] = cfg.distribution.sigma;
    } else if (cfg.distribution.kind == "bimodal") {
        d["major_weight"] = cfg.distribution.major_weight;
        d["offset"] = cfg.distribution.offset;
        d["sigma"] = cfg.distribution.sigma;
    } else {
        d["dimension"] = cfg.distribution.mixture.dimension;
        d["components"] = nlohmann::json::array();
        for (const auto& comp : cfg.distribution.mixture.components) {
            nlohmann::json cj;
            cj["mean"] = comp.mean;
            cj["weight"] = comp.weight;
            std::vector<std::vector<double>> rows;
            for (std::size_t r = 0; r < comp.covariance.rows(); ++r)
                rows.emplace_back(comp.covariance.row(r),
                                  comp.covariance.row(r) + comp.covariance.cols());
            cj["covariance"] = rows;
            d["components"].push_back(std::move(cj));
        }
    }
    j["distribution"] = std::move(d);
    j["n_samples"] = cfg.n_samples;
    j["split"] = {{"train_fraction", cfg.split.train_fraction},
                  {"test_fraction", cfg.split.test_fraction}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"d_steps", cfg.train.d_steps_per_g_step},
                  {"g_loss", cfg.train.g_loss_variant == GeneratorLoss::minimax
                                 ? "minimax"
                                 : "non_saturating"},
                  {"noise_dim", cfg.train.net.noise_dim},
                  {"g_hidden", cfg.train.net.g_hidden},
                  {"d_hidden", cfg.train.net.d_hidden},
                  {"init_std", cfg.train.net.init_std},
                  {"leaky_slope", cfg.train.net.leaky_slope},
                  {"learning_rate", cfg.train.optimizer.learning_rate},
                  {"beta1", cfg.train.optimizer.beta1},
                  {"beta2", cfg.train.optimizer.beta2},
                  {"epsilon", cfg.train.optimizer.epsilon}};
    j["methods"] = nlohmann::json::array();
    for (const auto& m : cfg.methods) {
        nlohmann::json mj;
        mj["label"] = m.label;
        mj["kind"] = m.kind;
        if (m.kind == "egan" || m.kind == "segan") {
            mj["members"] = m.members;
            mj["policy"] = m.policy == SamplingPolicy::uniform_random ? "uniform_random"
                                                                      : "equal_split";
        }
        if (m.kind == "segan") mj["window"] = {m.window_lo, m.window_hi};
        if (m.kind == "cgan") {
            mj["stages"] = m.stages;
            mj["ratio"] = m.ratio;
        }
        j["methods"].push_back(std::move(mj));
    }
    j["n_generated"] = cfg.n_generated;
    j["k"] = cfg.k;
    j["repetitions"] = cfg.repetitions;
    j["alpha"] = cfg.alpha;
    j["output_dir"] = cfg.output_dir;
    j["master_seed"] = cfg.master_seed;
    return j;
}

/// Hash of the canonical (sorted-key, defaults-filled) config serialization;
/// stable under key reordering in the source file. output_dir is excluded so
/// the same experiment hashes alike wherever its artifacts land.
inline std::string config_hash(const ExperimentConfig& cfg) {
    nlohmann::json j = experiment_config_to_json(cfg);
    j.erase("output_dir");
    const std::uint64_t h = fnv1a64(j.dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct MethodRunRecord {
    std::string label;
    std::uint64_t seed = 0;  ///< training seed actually used (post-retry)
    std::string status;      ///< "ok", "retried" or "failed"
    std::string error;       ///< divergence message when status != ok
    std::string checkpoint;  ///< relative path, empty when failed
    double train_seconds = 0.0;
};

struct RepetitionRecord {
    std::size_t index = 0;
    std::vector<MethodRunRecord> methods;
    double eval_seconds = 0.0;
};

struct RunManifest {
    std::string hash;
    nlohmann::json config;
    std::uint64_t data_seed = 0;
    std::uint64_t split_seed = 0;
    std::uint64_t baseline_seed = 0;
    std::vector<RepetitionRecord> repetitions;
    std::vector<std::string> reports;      ///< relative paths under output_dir
    std::vector<std::string> checkpoints;  ///< relative paths under output_dir
    std::vector<std::string> data_files;   ///< relative paths under output_dir
    double train_seconds = 0.0;
    double eval_seconds = 0.0;
    double total_seconds = 0.0;
    std::string output_dir;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json j;
    j["format"] = kManifestFormat;
    j["artifact_version"] = kArtifactVersion;
    j["config_hash"] = m.hash;
    j["config"] = m.config;
    j["seeds"] = {{"master", m.config.at("master_seed").get<std::uint64_t>()},
                  {"data", m.data_seed},
                  {"split", m.split_seed},
                  {"baseline", m.baseline_seed}};
    j["repetitions"] = nlohmann::json::array();
    for (const auto& rep : m.repetitions) {
        nlohmann::json rj;
        rj["index"] = rep.index;
        rj["eval_seconds"] = rep.eval_seconds;
        rj["methods"] = nlohmann::json::array();
        for (const auto& mr : rep.methods) {
            nlohmann::json mj;
            mj["label"] = mr.label;
            mj["seed"] = mr.seed;
            mj["status"] = mr.status;
            if (!mr.error.empty()) mj["error"] = mr.error;
            if (!mr.checkpoint.empty()) mj["checkpoint"] = mr.checkpoint;
            mj["train_seconds"] = mr.train_seconds;
            rj["methods"].push_back(std::move(mj));
        }
        j["repetitions"].push_back(std::move(rj));
    }
    j["reports"] = m.reports;
    j["checkpoints"] = m.checkpoints;
    j["data_files"] = m.data_files;
    j["timings"] = {{"train_seconds", m.train_seconds},
                    {"eval_seconds", m.eval_seconds},
                    {"total_seconds", m.total_seconds}};
    return j;
}

/// Writes <output_dir>/manifest.json after checking that every listed
/// artifact actually exists.
inline std::string save_manifest(const RunManifest& m) {
    const std::filesystem::path root(m.output_dir);
    auto must_exist = [&](const std::string& rel) {
        if (!std::filesystem::exists(root / rel))
            throw IoError("manifest lists missing file: " + (root / rel).string());
    };
    for (const auto& p : m.reports) must_exist(p);
    for (const auto& p : m.checkpoints) must_exist(p);
    for (const auto& p : m.data_files) must_exist(p);
    const std::string path = (root / "manifest.json").string();
    std::ofstream out = detail::open_out(path);
    out << manifest_to_json(m).dump(2) << "\n";
    return path;
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

namespace detail {

struct TrainedMethod {
    const MethodSpec* spec = nullptr;
    GanModel gan;           // kind == gan
    EnsembleModel ensemble; // other kinds
    bool ok = false;
};

inline TrainedMethod train_method(const PointSet& train, const MethodSpec& m,
                                  TrainConfig tc) {
    TrainedMethod out;
    out.spec = &m;
    if (m.kind == "gan") {
        out.gan = train_gan(train, tc);
    } else if (m.kind == "egan") {
        std::vector<std::uint64_t> seeds;
        for (std::size_t i = 0; i < m.members; ++i)
            seeds.push_back(derive_seed(tc.seed, "member", i));
        out.ensemble = train_standard_ensemble(train, m.members, tc, seeds);
    } else if (m.kind == "segan") {
        tc.snapshot_lo = m.window_lo;
        tc.snapshot_hi = m.window_hi;
        tc.epochs = std::max(tc.epochs, m.window_hi);
        out.ensemble = train_self_ensemble(train, m.members, tc);
    } else if (m.kind == "cgan") {
        out.ensemble = train_cascade(train, m.stages, m.ratio, tc);
    } else {
        throw ContractError("train_method: unknown kind '" + m.kind + "'");
    }
    out.ok = true;
    return out;
}

inline PointSet generate_method(const TrainedMethod& t, std::size_t n, std::uint64_t seed) {
    const MethodSpec& m = *t.spec;
    if (m.kind == "gan") return generate(t.gan, n, seed);
    const SamplingPolicy policy =
        m.kind == "cgan" ? SamplingPolicy::stage_shares : m.policy;
    return ensemble_generate(t.ensemble, n, policy, seed);
}

inline std::vector<std::string> save_method(const TrainedMethod& t, const std::string& dir,
                                            const std::string& label) {
    const std::string path = dir + "/" + label + ".json";
    std::vector<std::string> written;
    if (t.spec->kind == "gan") {
        save_checkpoint(t.gan, path);
        written.push_back(path);
    } else {
        save_ensemble(t.ensemble, path);
        written.push_back(path);
        for (std::size_t i = 0; i < t.ensemble.members.size(); ++i)
            written.push_back(member_path(path, i));
    }
    return written;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Sample `count` rows without replacement.
inline PointSet sample_rows(const PointSet& set, std::size_t count, std::uint64_t seed) {
    if (count > set.size())
        throw ContractError("sample_rows: asked for more rows than available");
    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    PointSet out;
    out.blocks = set.blocks;
    out.block_scales = set.block_scales;
    out.points = Matrix(count, set.dim());
    for (std::size_t r = 0; r < count; ++r) {
        const double* src = set.points.row(idx[r]);
        std::copy(src, src + set.dim(), out.points.row(r));
    }
    return out;
}

}  // namespace detail

/// Runs the full protocol: one dataset draw and split, then `repetitions`
/// rounds of training + generation + retrieval evaluation for every method,
/// with reports and checkpoints under cfg.output_dir. Returns the manifest
/// (also written to <output_dir>/manifest.json).
inline RunManifest run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    RunManifest manifest;
    manifest.output_dir = cfg.output_dir;
    manifest.config = experiment_config_to_json(cfg);
    manifest.hash = config_hash(cfg);
    manifest.data_seed = derive_seed(cfg.master_seed, "data");
    manifest.split_seed = derive_seed(cfg.master_seed, "split");
    manifest.baseline_seed = derive_seed(cfg.master_seed, "baseline");

    const std::filesystem::path root(cfg.output_dir);
    std::filesystem::create_directories(root / "reports");
    std::filesystem::create_directories(root / "checkpoints");
    std::filesystem::create_directories(root / "data");

    // One dataset for the whole experiment; repetitions vary only training
    // and generation randomness.
    const MixtureSpec mixture = cfg.distribution.to_mixture();
    const PointSet all = sample_mixture(mixture, cfg.n_samples, manifest.data_seed);
    SplitSpec split = cfg.split;
    split.seed = manifest.split_seed;
    auto [train, test] = train_test_split(all, split);

    save_pointset_csv(train, (root / "data" / "train.csv").string());
    save_pointset_csv(test, (root / "data" / "test.csv").string());
    manifest.data_files = {"data/train.csv", "data/test.csv"};

    // Feature scaling and the train-set baseline are fixed across repetitions.
    const std::vector<double> scales = block_scales(train);
    const PointSet test_n = apply_block_scales(test, scales);
    const std::size_t n_base = std::min(cfg.n_generated, train.size());
    const PointSet baseline =
        detail::sample_rows(train, n_base, manifest.baseline_seed);
    const PointSet baseline_n = apply_block_scales(baseline, scales);
    DistanceMatrix baseline_dm =
        knn_distances(test_n, baseline_n, cfg.k, kBaselineLabel, jobs);

    std::vector<std::string> labels;
    for (const auto& m : cfg.methods) labels.push_back(m.label);

    // Tallies over repetitions, methods only (the baseline row belongs to the
    // per-repetition matrix).
    ComparisonMatrix tally;
    tally.labels = labels;
    tally.tallies.assign(labels.size(), std::vector<PairTally>(labels.size()));

    // dhat_values[method][j-1] collects one value per successful repetition.
    std::vector<std::vector<std::vector<double>>> dhat_values(
        cfg.methods.size(), std::vector<std::vector<double>>(cfg.k));

    double train_total = 0.0;
    double eval_total = 0.0;

    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
        RepetitionRecord record;
        record.index = rep;
        const std::string rep_tag = "rep" + std::to_string(rep);

        std::vector<detail::TrainedMethod> trained(cfg.methods.size());
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            const MethodSpec& m = cfg.methods[mi];
            MethodRunRecord mr;
            mr.label = m.label;
            mr.seed = derive_seed(cfg.master_seed, "method." + m.label, rep);
            TrainConfig tc = cfg.train;
            tc.seed = mr.seed;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                trained[mi] = detail::train_method(train, m, tc);
                mr.status = "ok";
            } catch (const DivergenceError& first) {
                mr.error = first.what();
                mr.seed = derive_seed(mr.seed, "retry");
                tc.seed = mr.seed;
                try {
                    trained[mi] = detail::train_method(train, m, tc);
                    mr.status = "retried";
                } catch (const DivergenceError& second) {
                    mr.status = "failed";
                    mr.error = std::string(first.what()) + "; retry: " + second.what();
                }
            }
            mr.train_seconds = detail::seconds_since(t0);
            train_total += mr.train_seconds;
            if (trained[mi].ok) {
                const std::string ckpt_dir = (root / "checkpoints" / rep_tag).string();
                for (const std::string& path : detail::save_method(trained[mi], ckpt_dir, m.label)) {
                    const std::string rel =
                        std::filesystem::relative(path, root).generic_string();
                    manifest.checkpoints.push_back(rel);
                    if (mr.checkpoint.empty()) mr.checkpoint = rel;
                }
            }
            record.methods.push_back(std::move(mr));
        }

        const auto t_eval = std::chrono::steady_clock::now();
        std::vector<DistanceMatrix> matrices;  // baseline first, then ok methods
        std::vector<std::size_t> ok_index;     // method index per matrix row past baseline
        matrices.push_back(baseline_dm);
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            if (!trained[mi].ok) continue;
            const std::uint64_t gen_seed =
                derive_seed(record.methods[mi].seed, "generate");
            PointSet gen = detail::generate_method(trained[mi], cfg.n_generated, gen_seed);
            const PointSet gen_n = apply_block_scales(std::move(gen), scales);
            matrices.push_back(
                knn_distances(test_n, gen_n, cfg.k, cfg.methods[mi].label, jobs));
            ok_index.push_back(mi);
        }

        const std::string rep_dir = (root / "reports" / rep_tag).string();
        auto report = [&](const std::string& rel) {
            manifest.reports.push_back("reports/" + rep_tag + "/" + rel);
        };
        for (const auto& dm : matrices) {
            save_distance_matrix_csv(dm, rep_dir + "/distances_" + dm.label + ".csv");
            report("distances_" + dm.label + ".csv");
        }

        std::vector<std::string> curve_labels = {kBaselineLabel};
        std::vector<std::vector<double>> curves = {
            relative_nn_increase_curve(baseline_dm, baseline_dm)};
        for (std::size_t row = 0; row < ok_index.size(); ++row) {
            curve_labels.push_back(cfg.methods[ok_index[row]].label);
            curves.push_back(relative_nn_increase_curve(matrices[row + 1], baseline_dm));
            for (std::size_t j = 0; j < cfg.k; ++j)
                dhat_values[ok_index[row]][j].push_back(curves.back()[j]);
        }
        save_curves_csv(curve_labels, curves, rep_dir + "/dhat_curves.csv");
        report("dhat_curves.csv");

        if (matrices.size() >= 2) {
            const ComparisonMatrix cm = comparison_matrix(matrices, cfg.alpha);
            save_comparison_csv(cm, rep_dir + "/comparison.csv");
            report("comparison.csv");
            // Methods-only block accumulates into the cross-repetition tally.
            for (std::size_t a = 0; a < ok_index.size(); ++a) {
                for (std::size_t b = 0; b < ok_index.size(); ++b) {
                    PairTally& cell = tally.tallies[ok_index[a]][ok_index[b]];
                    const int code = cm.codes[a + 1][b + 1];
                    if (code > 0) ++cell.plus;
                    else if (code < 0) ++cell.minus;
                    else ++cell.zero;
                }
            }
        }
        record.eval_seconds = detail::seconds_since(t_eval);
        eval_total += record.eval_seconds;
        manifest.repetitions.push_back(std::move(record));
    }

    tally.codes.assign(labels.size(), std::vector<int>(labels.size(), 0));
    for (std::size_t a = 0; a < labels.size(); ++a)
        for (std::size_t b = 0; b < labels.size(); ++b)
            if (a != b)
                tally.codes[a][b] = detail::sign(tally.tallies[a][b].plus -
                                                 tally.tallies[a][b].minus);
    save_tally_csv(tally, (root / "reports" / "tallies.csv").string());
    manifest.reports.push_back("reports/tallies.csv");

    {
        nlohmann::json tj;
        tj["labels"] = tally.labels;
        tj["codes"] = tally.codes;
        tj["tallies"] = nlohmann::json::array();
        for (const auto& row : tally.tallies) {
            nlohmann::json rj = nlohmann::json::array();
            for (const auto& cell : row)
                rj.push_back({{"plus", cell.plus}, {"zero", cell.zero}, {"minus", cell.minus}});
            tj["tallies"].push_back(std::move(rj));
        }
        std::ofstream out = detail::open_out((root / "reports" / "tallies.json").string());
        out << tj.dump(2) << "\n";
        manifest.reports.push_back("reports/tallies.json");
    }

    {
        std::ofstream out = detail::open_out((root / "reports" / "dhat_summary.csv").string());
        out << "method,j,mean,median,runs\n";
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            for (std::size_t j = 0; j < cfg.k; ++j) {
                const auto& vals = dhat_values[mi][j];
                out << cfg.methods[mi].label << "," << (j + 1) << ",";
                if (vals.empty()) {
                    out << ",,0\n";
                } else {
                    out << format_double(mean_of(vals)) << "," << format_double(median_of(vals))
                        << "," << vals.size() << "\n";
                }
            }
        }
        manifest.reports.push_back("reports/dhat_summary.csv");
    }

    manifest.train_seconds = train_total;
    manifest.eval_seconds = eval_total;
    manifest.total_seconds = detail::seconds_since(t_start);
    save_manifest(manifest);
    return manifest;
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

/// Consolidates a finished run into one JSON document: per-method mean/median
/// d-hat at each j, the tally matrix, seeds, timings, and (when a method is
/// labeled "gan") each method's drop in mean nearest-neighbor increase
/// relative to that single GAN.
inline nlohmann::json report_summary(const std::string& manifest_path) {
    const nlohmann::json mj = detail::read_json_file(manifest_path, "manifest");
    if (!mj.contains("format") || mj.at("format").get<std::string>() != kManifestFormat)
        throw IoError(manifest_path + ": not a run manifest");
    if (!mj.contains("repetitions") || mj.at("repetitions").empty())
        throw ContractError(manifest_path + ": manifest lists no repetitions");

    const std::filesystem::path root = std::filesystem::path(manifest_path).parent_path();
    const nlohmann::json& config = mj.at("config");
    const std::size_t k = config.at("k").get<std::size_t>();

    std::vector<std::string> labels;
    for (const auto& m : config.at("methods")) labels.push_back(m.at("label").get<std::string>());

    // Collect d-hat curves from the per-repetition reports.
    std::map<std::string, std::vector<std::vector<double>>> values;  // label -> [j-1] -> runs
    for (const auto& label : labels) values[label].assign(k, {});
    values[kBaselineLabel].assign(k, {});
    for (const auto& rep : mj.at("repetitions")) {
        const std::string curve_path =
            (root / "reports" / ("rep" + std::to_string(rep.at("index").get<std::size_t>())) /
             "dhat_curves.csv")
                .string();
        if (!std::filesystem::exists(curve_path)) continue;
        for (const CurveRow& row : load_curves_csv(curve_path)) {
            auto it = values.find(row.method);
            if (it != values.end() && row.j >= 1 && row.j <= k)
                it->second[row.j - 1].push_back(row.value);
        }
    }

    nlohmann::json summary;
    summary["config_hash"] = mj.at("config_hash");
    summary["alpha"] = config.at("alpha");
    summary["k"] = k;
    summary["repetitions"] = mj.at("repetitions").size();

    nlohmann::json methods = nlohmann::json::array();
    std::map<std::string, double> mean_at_1;
    auto emit = [&](const std::string& label) {
        nlohmann::json entry;
        entry["label"] = label;
        nlohmann::json curve = nlohmann::json::array();
        for (std::size_t j = 0; j < k; ++j) {
            const auto& vals = values.at(label)[j];
            nlohmann::json point;
            point["j"] = j + 1;
            point["runs"] = vals.size();
            if (!vals.empty()) {
                point["mean"] = mean_of(vals);
                point["median"] = median_of(vals);
                if (j == 0) mean_at_1[label] = mean_of(vals);
            }
            curve.push_back(std::move(point));
        }
        entry["dhat"] = std::move(curve);
        methods.push_back(std::move(entry));
    };
    emit(kBaselineLabel);
    for (const auto& label : labels) emit(label);
    summary["methods"] = std::move(methods);

    // Headline: percentage drop of mean d-hat(j=1) versus the single GAN.
    if (mean_at_1.count("gan") && mean_at_1.at("gan") != 0.0) {
        nlohmann::json drops;
        for (const auto& label : labels) {
            if (label == "gan" || !mean_at_1.count(label)) continue;
            drops[label] =
                100.0 * (mean_at_1.at("gan") - mean_at_1.at(label)) / mean_at_1.at("gan");
        }
        if (!drops.empty()) summary["drop_vs_gan_percent"] = std::move(drops);
    }

    const std::string tally_path = (root / "reports" / "tallies.json").string();
    if (std::filesystem::exists(tally_path))
        summary["comparison"] = detail::read_json_file(tally_path, "tally table");

    summary["seeds"] = mj.at("seeds");
    nlohmann::json rep_seeds = nlohmann::json::array();
    for (const auto& rep : mj.at("repetitions")) {
        nlohmann::json rj;
        rj["index"] = rep.at("index");
        for (const auto& m : rep.at("methods")) rj[m.at("label").get<std::string>()] = m.at("seed");
        rep_seeds.push_back(std::move(rj));
    }
    summary["repetition_seeds"] = std::move(rep_seeds);
    summary["timings"] = mj.at("timings");
    return summary;
}

}  // namespace ganlab
