#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ganlab/errors.hpp"
#include "ganlab/matrix.hpp"
#include "ganlab/pointset.hpp"
#include "ganlab/rng.hpp"

namespace ganlab {

struct MixtureComponent {
    std::vector<double> mean;
    Matrix covariance;  // d x d, symmetric positive definite
    double weight = 0.0;
};

/// Gaussian mixture with known structure, so mode coverage stays checkable.
struct MixtureSpec {
    std::vector<MixtureComponent> components;
    std::size_t dimension = 0;

    void validate() const {
        if (components.empty()) throw ContractError("MixtureSpec: no components");
        double total = 0.0;
        for (std::size_t c = 0; c < components.size(); ++c) {
            const auto& comp = components[c];
            if (comp.mean.size() != dimension)
                throw ShapeError("MixtureSpec: component " + std::to_string(c) + " mean dim " +
                                 std::to_string(comp.mean.size()) + " != " +
                                 std::to_string(dimension));
            if (comp.covariance.rows() != dimension || comp.covariance.cols() != dimension)
                throw ShapeError("MixtureSpec: component " + std::to_string(c) +
                                 " covariance is " + shape_string(comp.covariance));
            if (!(comp.weight >= 0.0))
                throw ContractError("MixtureSpec: negative weight in component " +
                                    std::to_string(c));
            total += comp.weight;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw ContractError("MixtureSpec: weights sum to " + std::to_string(total));
    }
};

inline Matrix diagonal_covariance(const std::vector<double>& variances) {
    Matrix cov(variances.size(), variances.size());
    for (std::size_t i = 0; i < variances.size(); ++i) cov(i, i) = variances[i];
    return cov;
}

/// Equal-weight modes on a circle. The default is the 8-mode ring benchmark
/// (radius 6, sigma 0.3).
inline MixtureSpec ring_mixture(std::size_t modes = 8, double radius = 6.0, double sigma = 0.3) {
    MixtureSpec spec;
    spec.dimension = 2;
    for (std::size_t k = 0; k < modes; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                             static_cast<double>(modes);
        MixtureComponent comp;
        comp.mean = {radius * std::cos(angle), radius * std::sin(angle)};
        comp.covariance = diagonal_covariance({sigma * sigma, sigma * sigma});
        comp.weight = 1.0 / static_cast<double>(modes);
        spec.components.push_back(std::move(comp));
    }
    return spec;
}

/// Two modes at +-(5,0) with weights (0.9, 0.1): the benchmark where mode
/// dropping is observable.
inline MixtureSpec imbalanced_bimodal(double major_weight = 0.9, double offset = 5.0,
                                      double sigma = 1.0) {
    MixtureSpec spec;
    spec.dimension = 2;
    MixtureComponent major, minor;
    major.mean = {offset, 0.0};
    major.covariance = diagonal_covariance({sigma * sigma, sigma * sigma});
    major.weight = major_weight;
    minor.mean = {-offset, 0.0};
    minor.covariance = major.covariance;
    minor.weight = 1.0 - major_weight;
    spec.components = {std::move(major), std::move(minor)};
    return spec;
}

/// i.i.d. draws: component chosen by weight, then a Gaussian draw through the
/// Cholesky factor of its covariance.
inline PointSet sample_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw ContractError("sample_mixture: n must be >= 1");

    std::vector<Matrix> factors;
    factors.reserve(spec.components.size());
    for (const auto& comp : spec.components) factors.push_back(cholesky(comp.covariance));

    std::vector<double> weights;
    for (const auto& comp : spec.components) weights.push_back(comp.weight);

    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::normal_distribution<double> unit(0.0, 1.0);

    const std::size_t d = spec.dimension;
    Matrix points(n, d);
    std::vector<double> z(d);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t c = pick(rng);
        for (std::size_t i = 0; i < d; ++i) z[i] = unit(rng);
        const Matrix& l = factors[c];
        double* row = points.row(s);
        for (std::size_t i = 0; i < d; ++i) {
            double acc = spec.components[c].mean[i];
            for (std::size_t j = 0; j <= i; ++j) acc += l(i, j) * z[j];
            row[i] = acc;
        }
    }
    return PointSet::from_matrix(std::move(points));
}

struct SplitSpec {
    double train_fraction = 0.8;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(train_fraction > 0.0) || !(test_fraction > 0.0))
            throw ContractError("SplitSpec: fractions must be positive");
        if (train_fraction + test_fraction > 1.0 + 1e-12)
            throw ContractError("SplitSpec: fractions sum above 1");
    }
};

/// Seeded shuffle split into disjoint train/test sets; block metadata carries
/// over. Leftover points (when fractions sum below 1) are dropped.
inline std::pair<PointSet, PointSet> train_test_split(const PointSet& data,
                                                      const SplitSpec& split) {
    split.validate();
    const std::size_t n = data.size();
    const std::size_t n_train = static_cast<std::size_t>(std::llround(split.train_fraction * n));
    std::size_t n_test = static_cast<std::size_t>(std::llround(split.test_fraction * n));
    if (n_train + n_test > n) n_test = n - n_train;
    if (n_train == 0 || n_test == 0)
        throw ContractError("train_test_split: a side would be empty (n=" + std::to_string(n) +
                            ")");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(split.seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    auto gather = [&](std::size_t begin, std::size_t count) {
        PointSet out;
        out.blocks = data.blocks;
        out.block_scales = data.block_scales;
        out.points = Matrix(count, data.dim());
        for (std::size_t r = 0; r < count; ++r) {
            const double* src = data.points.row(idx[begin + r]);
            std::copy(src, src + data.dim(), out.points.row(r));
        }
        return out;
    };
    return {gather(0, n_train), gather(n_train, n_test)};
}

/// How pairwise distances are estimated inside block_normalize: all pairs up
/// to the exact threshold, then a fixed budget of seeded random pairs.
struct PairSampling {
    std::size_t exact_threshold = 2000;
    std::size_t sample_pairs = 1000000;
    std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

inline double mean_pairwise_distance_exact(const Matrix& points, const Block& block) {
    const std::size_t n = points.rows();
    if (n < 2) throw ContractError("mean_pairwise_distance: need at least 2 points");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* a = points.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double* b = points.row(j);
            double d2 = 0.0;
            for (std::size_t k = block.offset; k < block.offset + block.width; ++k) {
                const double diff = a[k] - b[k];
                d2 += diff * diff;
            }
            total += std::sqrt(d2);
        }
    }
    return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

inline double mean_pairwise_distance_sampled(const Matrix& points, const Block& block,
                                             std::size_t pairs, std::uint64_t seed) {
    const std::size_t n = points.rows();
    if (n < 2) throw ContractError("mean_pairwise_distance: need at least 2 points");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    double total = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
        std::size_t i = pick(rng), j = pick(rng);
        while (j == i) j = pick(rng);
        const double* a = points.row(i);
        const double* b = points.row(j);
        double d2 = 0.0;
        for (std::size_t k = block.offset; k < block.offset + block.width; ++k) {
            const double diff = a[k] - b[k];
            d2 += diff * diff;
        }
        total += std::sqrt(d2);
    }
    return total / static_cast<double>(pairs);
}

/// Per-block scale = mean pairwise Euclidean distance within the block over
/// the reference set. Degenerate blocks (zero mean distance) are rejected.
inline std::vector<double> block_scales(const PointSet& reference,
                                        const PairSampling& sampling = {}) {
    reference.validate();
    std::vector<double> scales;
    scales.reserve(reference.blocks.size());
    for (std::size_t b = 0; b < reference.blocks.size(); ++b) {
        const Block& block = reference.blocks[b];
        const double mean =
            reference.size() <= sampling.exact_threshold
                ? mean_pairwise_distance_exact(reference.points, block)
                : mean_pairwise_distance_sampled(reference.points, block, sampling.sample_pairs,
                                                 sampling.seed);
        if (!(mean > 0.0))
            throw ContractError("block_normalize: block " + std::to_string(b) +
                                " is degenerate (all points identical)");
        scales.push_back(mean);
    }
    return scales;
}

/// Divides each block's coordinates by its scale and records the scales.
inline PointSet apply_block_scales(PointSet set, const std::vector<double>& scales) {
    set.validate();
    if (scales.size() != set.blocks.size())
        throw ShapeError("apply_block_scales: scale count != block count");
    for (std::size_t b = 0; b < set.blocks.size(); ++b) {
        const Block& block = set.blocks[b];
        const double inv = 1.0 / scales[b];
        for (std::size_t r = 0; r < set.size(); ++r) {
            double* row = set.points.row(r);
            for (std::size_t k = block.offset; k < block.offset + block.width; ++k) row[k] *= inv;
        }
    }
    set.block_scales = scales;
    return set;
}

struct BlockNormalizeResult {
    std::vector<double> scales;
    PointSet reference;
    std::vector<PointSet> targets;
};

/// Rescales every block so the reference set's mean pairwise distance per
/// block becomes one, and applies the same scales to all targets.
inline BlockNormalizeResult block_normalize(const PointSet& reference,
                                            std::vector<PointSet> targets,
                                            const PairSampling& sampling = {}) {
    for (const auto& t : targets)
        if (!t.same_layout(reference))
            throw ShapeError("block_normalize: target layout differs from reference");
    BlockNormalizeResult result;
    result.scales = block_scales(reference, sampling);
    result.reference = apply_block_scales(reference, result.scales);
    result.targets.reserve(targets.size());
    for (auto& t : targets)
        result.targets.push_back(apply_block_scales(std::move(t), result.scales));
    return result;
}

}  // namespace ganlab
