#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ganlab/errors.hpp"

namespace ganlab {

/// Outcome of a paired Wilcoxon signed-rank test.
///   code +1  a significantly smaller than b (a better, for distances)
///   code  0  no significant difference at alpha
///   code -1  a significantly larger than b
struct WilcoxonResult {
    std::size_t n_effective = 0;  // pairs left after dropping zero differences
    double w_plus = 0.0;          // rank sum of positive differences (a - b > 0)
    double p_value = 1.0;         // two-sided
    int code = 0;
    double alpha = 0.05;
};

namespace detail {

/// Mid-ranks of |values|, ascending.
inline std::vector<double> abs_midranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(values[a]) < std::abs(values[b]);
    });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(values[order[j + 1]]) == std::abs(values[order[i]])) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mid;
        i = j + 1;
    }
    return ranks;
}

/// Exact two-sided p over all 2^n sign assignments of the ranks.
inline double exact_sign_flip_p(const std::vector<double>& ranks, double w_plus) {
    const std::size_t n = ranks.size();
    const double mu = 0.5 * std::accumulate(ranks.begin(), ranks.end(), 0.0);
    const bool upper = w_plus > mu;
    const std::uint64_t total = std::uint64_t(1) << n;
    std::uint64_t count = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::uint64_t(1) << i)) w += ranks[i];
        if (upper ? (w >= w_plus) : (w <= w_plus)) ++count;
    }
    return std::min(1.0, 2.0 * static_cast<double>(count) / static_cast<double>(total));
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Normal approximation with continuity correction; the variance is computed
/// from the mid-ranks themselves, which already carries the tie correction.
inline double approx_sign_flip_p(const std::vector<double>& ranks, double w_plus) {
    const double mu = 0.5 * std::accumulate(ranks.begin(), ranks.end(), 0.0);
    double var = 0.0;
    for (double r : ranks) var += r * r;
    var *= 0.25;
    const double shift = std::abs(w_plus - mu);
    if (shift == 0.0) return 1.0;
    const double z = (shift - 0.5) / std::sqrt(var);
    return std::min(1.0, 2.0 * std_normal_cdf(-z));
}

}  // namespace detail

/// Paired signed-rank test of the hypothesis that the median of a - b is
/// zero. Zero differences are dropped; tied magnitudes get mid-ranks. The p
/// value is exact (sign-assignment enumeration) up to `exact_threshold`
/// effective pairs, then a tie-corrected normal approximation with continuity
/// correction.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                           double alpha = 0.05,
                                           std::size_t exact_threshold = 20) {
    if (a.size() != b.size())
        throw ShapeError("wilcoxon_signed_rank: length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
    if (a.empty()) throw ContractError("wilcoxon_signed_rank: empty input");

    std::vector<double> diffs;
    diffs.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }

    WilcoxonResult result;
    result.alpha = alpha;
    result.n_effective = diffs.size();
    if (diffs.empty()) return result;  // code 0, p = 1

    const std::vector<double> ranks = detail::abs_midranks(diffs);
    double w_plus = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i)
        if (diffs[i] > 0.0) w_plus += ranks[i];
    result.w_plus = w_plus;

    result.p_value = diffs.size() <= exact_threshold
                         ? detail::exact_sign_flip_p(ranks, w_plus)
                         : detail::approx_sign_flip_p(ranks, w_plus);

    if (result.p_value < alpha) {
        const double mu = 0.25 * static_cast<double>(diffs.size()) *
                          static_cast<double>(diffs.size() + 1);
        result.code = w_plus < mu ? +1 : -1;
    }
    return result;
}

}  // namespace ganlab
