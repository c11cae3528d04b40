#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ganlab/errors.hpp"
#include "ganlab/knn.hpp"
#include "ganlab/wilcoxon.hpp"

namespace ganlab {

/// Relative increase in mean j-th nearest neighbor distance of a method over
/// the train-set baseline: (mean_j(method) - mean_j(baseline)) / mean_j(baseline).
/// Zero is ideal; 0.1 means the method's nearest neighbors are 10% farther.
inline double relative_nn_increase(const DistanceMatrix& method, const DistanceMatrix& baseline,
                                   std::size_t j) {
    if (method.queries() != baseline.queries())
        throw ShapeError("relative_nn_increase: query counts differ (" +
                         std::to_string(method.queries()) + " vs " +
                         std::to_string(baseline.queries()) + ")");
    const double method_mean = mean_distance_at(method, j);
    const double baseline_mean = mean_distance_at(baseline, j);
    if (baseline_mean == 0.0)
        throw ContractError("relative_nn_increase: baseline mean distance is zero at j=" +
                            std::to_string(j));
    return (method_mean - baseline_mean) / baseline_mean;
}

/// The whole curve for j = 1..k (index 0 holds j=1).
inline std::vector<double> relative_nn_increase_curve(const DistanceMatrix& method,
                                                      const DistanceMatrix& baseline) {
    const std::size_t k = std::min(method.k(), baseline.k());
    std::vector<double> curve(k);
    for (std::size_t j = 1; j <= k; ++j)
        curve[j - 1] = relative_nn_increase(method, baseline, j);
    return curve;
}

/// Tally of pairwise codes over repeated runs: how often a method came out
/// better / indistinguishable / worse.
struct PairTally {
    int plus = 0;
    int zero = 0;
    int minus = 0;

    int runs() const { return plus + zero + minus; }
};

/// All-pairs Wilcoxon codes at the nearest neighbor (j=1). With several runs
/// the tallies count codes per pair and the code entry is the sign of
/// (wins - losses).
struct ComparisonMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<int>> codes;
    std::vector<std::vector<PairTally>> tallies;

    std::size_t methods() const { return labels.size(); }
};

namespace detail {

inline std::vector<double> nearest_column(const DistanceMatrix& m) {
    std::vector<double> col(m.queries());
    for (std::size_t i = 0; i < m.queries(); ++i) col[i] = m.entries(i, 0);
    return col;
}

inline int sign(int v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

}  // namespace detail

/// Pairwise comparison over one or more runs. `runs[r]` holds one
/// DistanceMatrix per method, in a consistent order with consistent labels.
inline ComparisonMatrix comparison_matrix(const std::vector<std::vector<DistanceMatrix>>& runs,
                                          double alpha = 0.05) {
    if (runs.empty() || runs.front().size() < 2)
        throw ContractError("comparison_matrix: need at least 2 methods and 1 run");
    const std::size_t m = runs.front().size();
    const std::size_t n_queries = runs.front().front().queries();

    ComparisonMatrix result;
    for (const auto& mat : runs.front()) result.labels.push_back(mat.label);
    for (const auto& run : runs) {
        if (run.size() != m)
            throw ContractError("comparison_matrix: runs disagree on method count");
        for (std::size_t i = 0; i < m; ++i) {
            if (run[i].label != result.labels[i])
                throw ContractError("comparison_matrix: method labels differ across runs");
            if (run[i].queries() != n_queries)
                throw ContractError("comparison_matrix: inconsistent test-set sizes");
        }
    }

    result.tallies.assign(m, std::vector<PairTally>(m));
    for (const auto& run : runs) {
        std::vector<std::vector<double>> nearest(m);
        for (std::size_t i = 0; i < m; ++i) nearest[i] = detail::nearest_column(run[i]);
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = 0; b < m; ++b) {
                if (a == b) {
                    ++result.tallies[a][b].zero;
                    continue;
                }
                const int code = wilcoxon_signed_rank(nearest[a], nearest[b], alpha).code;
                if (code > 0) ++result.tallies[a][b].plus;
                else if (code < 0) ++result.tallies[a][b].minus;
                else ++result.tallies[a][b].zero;
            }
        }
    }

    result.codes.assign(m, std::vector<int>(m, 0));
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
            if (a != b)
                result.codes[a][b] =
                    detail::sign(result.tallies[a][b].plus - result.tallies[a][b].minus);
    return result;
}

/// Single-run convenience overload.
inline ComparisonMatrix comparison_matrix(const std::vector<DistanceMatrix>& methods,
                                          double alpha = 0.05) {
    return comparison_matrix(std::vector<std::vector<DistanceMatrix>>{methods}, alpha);
}

}  // namespace ganlab
