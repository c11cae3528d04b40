#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ganlab/adam.hpp"
#include "ganlab/errors.hpp"
#include "ganlab/mlp.hpp"
#include "ganlab/pointset.hpp"
#include "ganlab/rng.hpp"

namespace ganlab {

/// Scores are clamped into [kScoreClamp, 1 - kScoreClamp] before any log, so
/// losses stay finite for every score in [0,1]. Gradients are the derivatives
/// of the clamped loss (zero where the clamp is active).
inline constexpr double kScoreClamp = 1e-7;

enum class GeneratorLoss {
    minimax,         // mean log(1 - D(G(z)))
    non_saturating,  // -mean log D(G(z))
};

struct NetConfig {
    std::size_t noise_dim = 8;
    std::vector<std::size_t> g_hidden = {64, 64};
    std::vector<std::size_t> d_hidden = {64, 64};
    double init_std = 0.02;
    double leaky_slope = 0.2;
};

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 50;
    std::size_t d_steps_per_g_step = 1;
    GeneratorLoss g_loss_variant = GeneratorLoss::non_saturating;
    // Generator snapshots are recorded for epochs in [lo, hi] when a
    // SnapshotStore is passed to train_gan. Epochs count from 1, so the
    // default [0,0] records nothing.
    std::size_t snapshot_lo = 0;
    std::size_t snapshot_hi = 0;
    bool snapshot_discriminators = false;
    AdamConfig optimizer;
    NetConfig net;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 2) throw ContractError("TrainConfig: batch_size must be >= 2");
        if (snapshot_lo > snapshot_hi)
            throw ContractError("TrainConfig: snapshot window lo > hi");
        if (snapshot_hi > epochs)
            throw ContractError("TrainConfig: snapshot window extends past epochs (" +
                                std::to_string(snapshot_hi) + " > " + std::to_string(epochs) +
                                ")");
        if (net.noise_dim == 0) throw ContractError("TrainConfig: noise_dim must be positive");
    }
};

/// A trained generator/discriminator pair plus training metadata.
struct GanModel {
    MlpParams generator;      // noise_dim -> data_dim, identity output
    MlpParams discriminator;  // data_dim -> 1, sigmoid output
    std::size_t noise_dim = 0;
    std::size_t epochs_trained = 0;
    std::uint64_t init_seed = 0;

    std::size_t data_dim() const { return generator.output_dim(); }
};

/// Generator parameters per snapshot epoch (discriminators optional).
struct SnapshotStore {
    std::map<std::size_t, MlpParams> generators;
    std::map<std::size_t, MlpParams> discriminators;
};

inline double clamp_score(double s) {
    return std::min(std::max(s, kScoreClamp), 1.0 - kScoreClamp);
}

/// Discriminator loss: -mean log D(x_real) - mean log(1 - D(x_fake)).
/// Zero is approached only at perfect discrimination (up to clamping).
inline double d_loss(std::span<const double> scores_real, std::span<const double> scores_fake) {
    if (scores_real.empty() || scores_fake.empty())
        throw ContractError("d_loss: empty score vector");
    double real_term = 0.0, fake_term = 0.0;
    for (double s : scores_real) real_term += std::log(clamp_score(s));
    for (double s : scores_fake) fake_term += std::log(1.0 - clamp_score(s));
    return -real_term / static_cast<double>(scores_real.size()) -
           fake_term / static_cast<double>(scores_fake.size());
}

inline double g_loss(std::span<const double> scores_fake, GeneratorLoss variant) {
    if (scores_fake.empty()) throw ContractError("g_loss: empty score vector");
    double acc = 0.0;
    if (variant == GeneratorLoss::minimax) {
        for (double s : scores_fake) acc += std::log(1.0 - clamp_score(s));
        return acc / static_cast<double>(scores_fake.size());
    }
    for (double s : scores_fake) acc += std::log(clamp_score(s));
    return -acc / static_cast<double>(scores_fake.size());
}

namespace detail {

inline bool clamped(double s) { return s <= kScoreClamp || s >= 1.0 - kScoreClamp; }

// dLoss/dScore columns for the three loss terms; n is the batch size the
// mean was taken over.
inline double d_loss_real_grad(double s, std::size_t n) {
    return clamped(s) ? 0.0 : -1.0 / (static_cast<double>(n) * s);
}
inline double d_loss_fake_grad(double s, std::size_t n) {
    return clamped(s) ? 0.0 : 1.0 / (static_cast<double>(n) * (1.0 - s));
}
inline double g_loss_grad(double s, GeneratorLoss variant, std::size_t n) {
    if (clamped(s)) return 0.0;
    if (variant == GeneratorLoss::minimax)
        return -1.0 / (static_cast<double>(n) * (1.0 - s));
    return -1.0 / (static_cast<double>(n) * s);
}

}  // namespace detail

/// D(x) for every row of `points`: the probability that x is real.
inline std::vector<double> discriminator_score(const GanModel& model, const PointSet& points) {
    if (points.dim() != model.data_dim())
        throw ShapeError("discriminator_score: point dim " + std::to_string(points.dim()) +
                         " != model data dim " + std::to_string(model.data_dim()));
    Matrix out = mlp_forward(model.discriminator, points.points);
    std::vector<double> scores(out.rows());
    for (std::size_t i = 0; i < out.rows(); ++i) scores[i] = out(i, 0);
    return scores;
}

/// Discriminator gradients of d_loss for one real and one fake batch.
/// Exposed for the finite-difference consistency checks.
inline GradientSet d_loss_grads(const MlpParams& discriminator, const Matrix& real_batch,
                                const Matrix& fake_batch, double* loss_out = nullptr) {
    ForwardCache cache_real, cache_fake;
    Matrix s_real = mlp_forward(discriminator, real_batch, &cache_real);
    Matrix s_fake = mlp_forward(discriminator, fake_batch, &cache_fake);

    if (loss_out) {
        *loss_out = d_loss(std::span<const double>(s_real.data(), s_real.rows()),
                           std::span<const double>(s_fake.data(), s_fake.rows()));
    }

    Matrix up_real(s_real.rows(), 1), up_fake(s_fake.rows(), 1);
    for (std::size_t i = 0; i < s_real.rows(); ++i)
        up_real(i, 0) = detail::d_loss_real_grad(s_real(i, 0), s_real.rows());
    for (std::size_t i = 0; i < s_fake.rows(); ++i)
        up_fake(i, 0) = detail::d_loss_fake_grad(s_fake(i, 0), s_fake.rows());

    GradientSet grads = mlp_backward(discriminator, cache_real, up_real);
    grads.add(mlp_backward(discriminator, cache_fake, up_fake));
    return grads;
}

/// Generator gradients of g_loss through the discriminator for a noise batch.
inline GradientSet g_loss_grads(const MlpParams& generator, const MlpParams& discriminator,
                                const Matrix& noise_batch, GeneratorLoss variant,
                                double* loss_out = nullptr) {
    ForwardCache cache_g, cache_d;
    Matrix fake = mlp_forward(generator, noise_batch, &cache_g);
    Matrix s_fake = mlp_forward(discriminator, fake, &cache_d);

    if (loss_out)
        *loss_out = g_loss(std::span<const double>(s_fake.data(), s_fake.rows()), variant);

    Matrix up(s_fake.rows(), 1);
    for (std::size_t i = 0; i < s_fake.rows(); ++i)
        up(i, 0) = detail::g_loss_grad(s_fake(i, 0), variant, s_fake.rows());

    Matrix d_fake;
    mlp_backward(discriminator, cache_d, up, &d_fake);
    return mlp_backward(generator, cache_g, d_fake);
}

/// Trains the adversarial pair on `data`. One epoch is one pass over the data
/// in shuffled mini-batches (shuffle seeded per epoch). Each batch runs
/// d_steps_per_g_step discriminator updates then one generator update.
/// Snapshots of the generator are recorded into `snapshots` for every epoch
/// inside [snapshot_lo, snapshot_hi].
inline GanModel train_gan(const PointSet& data, const TrainConfig& cfg,
                          SnapshotStore* snapshots = nullptr) {
    cfg.validate();
    if (data.size() == 0) throw ContractError("train_gan: empty training set");
    const std::size_t data_dim = data.dim();
    const std::size_t n = data.size();

    GanModel model;
    model.noise_dim = cfg.net.noise_dim;
    model.init_seed = cfg.seed;

    std::vector<std::size_t> g_widths = {cfg.net.noise_dim};
    g_widths.insert(g_widths.end(), cfg.net.g_hidden.begin(), cfg.net.g_hidden.end());
    g_widths.push_back(data_dim);
    model.generator = make_mlp(g_widths, Activation::relu(), Activation::identity(),
                               cfg.net.init_std, derive_seed(cfg.seed, "init.generator"));

    std::vector<std::size_t> d_widths = {data_dim};
    d_widths.insert(d_widths.end(), cfg.net.d_hidden.begin(), cfg.net.d_hidden.end());
    d_widths.push_back(1);
    model.discriminator = make_mlp(d_widths, Activation::leaky_relu(cfg.net.leaky_slope),
                                   Activation::sigmoid(), cfg.net.init_std,
                                   derive_seed(cfg.seed, "init.discriminator"));

    OptimizerState opt_g = OptimizerState::create(model.generator, cfg.optimizer);
    OptimizerState opt_d = OptimizerState::create(model.discriminator, cfg.optimizer);

    std::mt19937_64 noise_rng(derive_seed(cfg.seed, "noise"));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    auto record_snapshot = [&](std::size_t epoch) {
        if (!snapshots) return;
        if (epoch < cfg.snapshot_lo || epoch > cfg.snapshot_hi) return;
        snapshots->generators[epoch] = model.generator;
        if (cfg.snapshot_discriminators) snapshots->discriminators[epoch] = model.discriminator;
    };

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        for (std::size_t start = 0, batch_index = 0; start < n; start += cfg.batch_size,
                         ++batch_index) {
            const std::size_t batch_n = std::min(cfg.batch_size, n - start);
            if (batch_n < 2) break;  // a trailing single sample cannot form a batch

            Matrix real(batch_n, data_dim);
            for (std::size_t r = 0; r < batch_n; ++r) {
                const double* src = data.points.row(order[start + r]);
                std::copy(src, src + data_dim, real.row(r));
            }

            for (std::size_t ds = 0; ds < cfg.d_steps_per_g_step; ++ds) {
                Matrix z = normal_matrix(batch_n, cfg.net.noise_dim, 0.0, 1.0, noise_rng);
                Matrix fake = mlp_forward(model.generator, z);
                double loss = 0.0;
                GradientSet grads = d_loss_grads(model.discriminator, real, fake, &loss);
                if (!std::isfinite(loss))
                    throw DivergenceError("train_gan: non-finite discriminator loss",
                                          std::size_t(-1), static_cast<long>(epoch),
                                          static_cast<long>(batch_index));
                adam_step(model.discriminator, grads, opt_d);
            }

            Matrix z = normal_matrix(batch_n, cfg.net.noise_dim, 0.0, 1.0, noise_rng);
            double loss = 0.0;
            GradientSet grads = g_loss_grads(model.generator, model.discriminator, z,
                                             cfg.g_loss_variant, &loss);
            if (!std::isfinite(loss))
                throw DivergenceError("train_gan: non-finite generator loss", std::size_t(-1),
                                      static_cast<long>(epoch), static_cast<long>(batch_index));
            adam_step(model.generator, grads, opt_g);
        }

        model.epochs_trained = epoch;
        record_snapshot(epoch);
    }
    return model;
}

/// Draws n points from the generator with standard normal noise.
inline PointSet generate(const GanModel& model, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ContractError("generate: n must be >= 1");
    std::mt19937_64 rng(seed);
    Matrix z = normal_matrix(n, model.noise_dim, 0.0, 1.0, rng);
    return PointSet::from_matrix(mlp_forward(model.generator, z));
}

}  // namespace ganlab
