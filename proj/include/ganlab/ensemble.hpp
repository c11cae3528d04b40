#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ganlab/errors.hpp"
#include "ganlab/gan.hpp"
#include "ganlab/pointset.hpp"
#include "ganlab/rng.hpp"

namespace ganlab {

enum class EnsembleKind { standard, self, cascade };

/// One generator in an ensemble, with how it was produced (seed/epoch/stage).
struct EnsembleMember {
    MlpParams generator;
    std::uint64_t init_seed = 0;
    std::size_t epoch = 0;
    std::size_t stage = 0;  // cascade stage, 0-based; 0 for other kinds
};

enum class SamplingPolicy { equal_split, uniform_random, stage_shares };

/// A tagged collection of generators plus its sampling policy data.
struct EnsembleModel {
    EnsembleKind kind = EnsembleKind::standard;
    std::vector<EnsembleMember> members;
    std::size_t noise_dim = 0;
    std::vector<double> stage_shares;      // cascade only, sums to 1
    std::vector<double> gate_thresholds;   // cascade only, one per gate
    std::vector<std::size_t> stage_sizes;  // cascade only, training-set size per stage

    std::size_t data_dim() const {
        return members.empty() ? 0 : members.front().generator.output_dim();
    }

    void validate() const {
        if (members.empty()) throw ContractError("EnsembleModel: no members");
        for (const auto& m : members) {
            if (m.generator.output_dim() != data_dim() ||
                m.generator.input_dim() != noise_dim)
                throw ShapeError("EnsembleModel: members disagree on data/noise dimensions");
        }
        if (kind == EnsembleKind::standard) {
            std::set<std::uint64_t> seeds;
            for (const auto& m : members) seeds.insert(m.init_seed);
            if (seeds.size() != members.size())
                throw ContractError("EnsembleModel: standard members must have distinct seeds");
        }
        if (kind == EnsembleKind::self) {
            for (const auto& m : members)
                if (m.init_seed != members.front().init_seed)
                    throw ContractError("EnsembleModel: self members must share one init seed");
            for (std::size_t i = 1; i < members.size(); ++i)
                if (members[i].epoch <= members[i - 1].epoch)
                    throw ContractError("EnsembleModel: self member epochs must increase");
        }
        if (kind == EnsembleKind::cascade) {
            if (stage_shares.size() != members.size())
                throw ContractError("EnsembleModel: stage_shares size != stage count");
            double total = std::accumulate(stage_shares.begin(), stage_shares.end(), 0.0);
            if (std::abs(total - 1.0) > 1e-12)
                throw ContractError("EnsembleModel: stage shares sum to " +
                                    std::to_string(total));
            if (!stage_sizes.empty() && stage_sizes.size() != members.size())
                throw ContractError("EnsembleModel: stage_sizes size != stage count");
        }
    }
};

/// Score threshold realizing a target redirected fraction r: the largest
/// floor(r*N) scores pass the strict `score > t` test, so the passed fraction
/// lies in [r - 1/N, r]. Ties at the threshold admit fewer points.
inline double gate_threshold(const std::vector<double>& scores, double ratio) {
    if (scores.empty()) throw ContractError("gate_threshold: empty score vector");
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw ContractError("gate_threshold: ratio must be in [0,1]");
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const std::size_t pass = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    if (pass >= n) {
        // everything passes: the largest double strictly below the minimum
        return std::nextafter(sorted.front(), -std::numeric_limits<double>::infinity());
    }
    return sorted[n - pass - 1];
}

/// Gate decision for one point: redirected iff D(x) > threshold.
struct GateDecision {
    double score = 0.0;
    double threshold = 0.0;
    bool redirected = false;
};

/// Splits off the points the discriminator still recognizes as real, i.e. the
/// badly modeled part of the data. Order stable.
inline std::pair<PointSet, std::vector<GateDecision>> apply_gate(const GanModel& model,
                                                                 const PointSet& data,
                                                                 double threshold) {
    if (!std::isfinite(threshold)) throw ContractError("apply_gate: threshold must be finite");
    const std::vector<double> scores = discriminator_score(model, data);

    std::vector<GateDecision> decisions(scores.size());
    std::size_t count = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        decisions[i] = {scores[i], threshold, scores[i] > threshold};
        if (decisions[i].redirected) ++count;
    }

    PointSet passed;
    passed.blocks = data.blocks;
    passed.block_scales = data.block_scales;
    passed.points = Matrix(count, data.dim());
    for (std::size_t i = 0, r = 0; i < scores.size(); ++i) {
        if (!decisions[i].redirected) continue;
        const double* src = data.points.row(i);
        std::copy(src, src + data.dim(), passed.points.row(r++));
    }
    return {std::move(passed), std::move(decisions)};
}

/// Ensemble of independently initialized GANs, each trained from scratch on
/// the full data.
inline EnsembleModel train_standard_ensemble(const PointSet& data, std::size_t m,
                                             const TrainConfig& cfg,
                                             const std::vector<std::uint64_t>& seeds) {
    if (m < 2) throw ContractError("train_standard_ensemble: need at least 2 members");
    if (seeds.size() != m)
        throw ContractError("train_standard_ensemble: expected " + std::to_string(m) + " seeds");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != m)
        throw ContractError("train_standard_ensemble: duplicate seeds");

    EnsembleModel ens;
    ens.kind = EnsembleKind::standard;
    ens.noise_dim = cfg.net.noise_dim;
    for (std::size_t i = 0; i < m; ++i) {
        TrainConfig member_cfg = cfg;
        member_cfg.seed = seeds[i];
        GanModel model = train_gan(data, member_cfg);
        ens.members.push_back({std::move(model.generator), seeds[i], model.epochs_trained, 0});
    }
    ens.validate();
    return ens;
}

/// Picks m distinct snapshot epochs uniformly without replacement from
/// [lo, hi] (a seeded shuffle prefix) and assembles them into a self-ensemble.
inline EnsembleModel self_ensemble_from_snapshots(const SnapshotStore& snapshots,
                                                  std::uint64_t init_seed, std::size_t noise_dim,
                                                  std::size_t m, std::size_t lo, std::size_t hi,
                                                  std::uint64_t selection_seed) {
    if (lo > hi) throw ContractError("self_ensemble: window lo > hi");
    const std::size_t window = hi - lo + 1;
    if (m > window)
        throw ContractError("self_ensemble: window [" + std::to_string(lo) + "," +
                            std::to_string(hi) + "] holds " + std::to_string(window) +
                            " epochs, fewer than m=" + std::to_string(m));
    std::vector<std::size_t> epochs(window);
    std::iota(epochs.begin(), epochs.end(), lo);
    std::mt19937_64 rng(selection_seed);
    std::shuffle(epochs.begin(), epochs.end(), rng);
    epochs.resize(m);
    std::sort(epochs.begin(), epochs.end());

    EnsembleModel ens;
    ens.kind = EnsembleKind::self;
    ens.noise_dim = noise_dim;
    for (std::size_t epoch : epochs) {
        auto it = snapshots.generators.find(epoch);
        if (it == snapshots.generators.end())
            throw ContractError("self_ensemble: no snapshot recorded for epoch " +
                                std::to_string(epoch));
        ens.members.push_back({it->second, init_seed, epoch, 0});
    }
    ens.validate();
    return ens;
}

/// One training run; members are epoch snapshots from the configured window.
inline EnsembleModel train_self_ensemble(const PointSet& data, std::size_t m,
                                         const TrainConfig& cfg) {
    if (cfg.snapshot_lo == 0)
        throw ContractError("train_self_ensemble: config has no snapshot window");
    SnapshotStore snapshots;
    train_gan(data, cfg, &snapshots);
    return self_ensemble_from_snapshots(snapshots, cfg.seed, cfg.net.noise_dim, m,
                                        cfg.snapshot_lo, cfg.snapshot_hi,
                                        derive_seed(cfg.seed, "self.select"));
}

/// Sampling share of each cascade stage: a stage keeps the (1-r) fraction it
/// was the last to model, the final stage keeps everything redirected to it.
inline std::vector<double> cascade_stage_shares(std::size_t stages, double ratio) {
    std::vector<double> shares(stages);
    for (std::size_t k = 0; k + 1 < stages; ++k)
        shares[k] = (1.0 - ratio) * std::pow(ratio, static_cast<double>(k));
    shares[stages - 1] = std::pow(ratio, static_cast<double>(stages - 1));
    return shares;
}

/// Sequential GANs: stage 1 sees all data; each gate redirects the ratio r of
/// points its own discriminator scores highest to the next stage. If a
/// redirected subset falls under 2*batch_size the cascade truncates early.
inline EnsembleModel train_cascade(const PointSet& data, std::size_t stages, double ratio,
                                   const TrainConfig& cfg) {
    if (stages < 2) throw ContractError("train_cascade: need at least 2 stages");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ContractError("train_cascade: ratio must be in (0,1)");

    EnsembleModel ens;
    ens.kind = EnsembleKind::cascade;
    ens.noise_dim = cfg.net.noise_dim;

    PointSet current = data;
    for (std::size_t stage = 0; stage < stages; ++stage) {
        TrainConfig stage_cfg = cfg;
        stage_cfg.seed = derive_seed(cfg.seed, "cascade.stage", stage);
        ens.stage_sizes.push_back(current.size());
        GanModel model = train_gan(current, stage_cfg);
        ens.members.push_back({model.generator, stage_cfg.seed, model.epochs_trained, stage});

        if (stage + 1 == stages) break;

        const std::vector<double> scores = discriminator_score(model, current);
        const double threshold = gate_threshold(scores, ratio);
        auto [passed, decisions] = apply_gate(model, current, threshold);
        ens.gate_thresholds.push_back(threshold);

        if (passed.size() < 2 * cfg.batch_size) {
            std::cerr << "train_cascade: stage " << (stage + 2) << " would train on "
                      << passed.size() << " points (< 2*batch_size); truncating cascade at "
                      << (stage + 1) << " stage(s)\n";
            ens.gate_thresholds.pop_back();
            break;
        }
        current = std::move(passed);
    }

    ens.stage_shares = cascade_stage_shares(ens.members.size(), ratio);
    ens.validate();
    return ens;
}

namespace detail {

/// Largest-remainder apportionment of n samples over the given shares.
inline std::vector<std::size_t> share_counts(std::size_t n, const std::vector<double>& shares) {
    std::vector<std::size_t> counts(shares.size());
    std::vector<std::pair<double, std::size_t>> remainders(shares.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < shares.size(); ++i) {
        const double exact = shares[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        remainders[i] = {exact - std::floor(exact), i};
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t k = 0; k < n - assigned; ++k) ++counts[remainders[k].second];
    return counts;
}

inline Matrix member_samples(const EnsembleMember& member, std::size_t count, std::size_t noise_dim,
                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Matrix z = normal_matrix(count, noise_dim, 0.0, 1.0, rng);
    return mlp_forward(member.generator, z);
}

}  // namespace detail

/// Generates exactly n points from the ensemble.
///   equal_split    floor(n/m) per member, remainder to the first members
///   uniform_random member drawn uniformly per sample
///   stage_shares   member k draws n*share_k (cascade only)
/// `member_counts`, when given, receives how many samples each member drew.
inline PointSet ensemble_generate(const EnsembleModel& ens, std::size_t n, SamplingPolicy policy,
                                  std::uint64_t seed,
                                  std::vector<std::size_t>* member_counts = nullptr) {
    ens.validate();
    const std::size_t m = ens.members.size();
    const std::size_t dim = ens.data_dim();

    std::vector<std::size_t> counts(m, 0);
    if (policy == SamplingPolicy::equal_split) {
        if (n < m)
            throw ContractError("ensemble_generate: equal_split needs n >= member count");
        for (std::size_t i = 0; i < m; ++i) counts[i] = n / m + (i < n % m ? 1 : 0);
    } else if (policy == SamplingPolicy::uniform_random) {
        std::mt19937_64 rng(derive_seed(seed, "member.pick"));
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        for (std::size_t s = 0; s < n; ++s) ++counts[pick(rng)];
    } else {
        if (ens.kind != EnsembleKind::cascade)
            throw ContractError("ensemble_generate: stage_shares needs a cascade ensemble");
        counts = detail::share_counts(n, ens.stage_shares);
    }

    PointSet out;
    out.blocks = {Block{0, dim}};
    out.points = Matrix(n, dim);
    std::size_t row = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (counts[i] == 0) continue;
        // A one-member ensemble must reproduce generate() on that member, so
        // the noise stream only forks when there is more than one member.
        const std::uint64_t noise_seed = m == 1 ? seed : derive_seed(seed, "member.noise", i);
        Matrix samples = detail::member_samples(ens.members[i], counts[i], ens.noise_dim, noise_seed);
        std::copy(samples.data(), samples.data() + samples.size(), out.points.row(row));
        row += counts[i];
    }
    if (member_counts) *member_counts = counts;
    return out;
}

}  // namespace ganlab
