#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

#include "ganlab/errors.hpp"
#include "ganlab/matrix.hpp"
#include "ganlab/pointset.hpp"

namespace ganlab {

/// entries(i, j) = distance of the (j+1)-th nearest generated point to query
/// point i; rows sorted non-decreasing.
struct DistanceMatrix {
    std::string label;
    Matrix entries;  // n_queries x k

    std::size_t queries() const { return entries.rows(); }
    std::size_t k() const { return entries.cols(); }
};

namespace detail {

inline void knn_row(const Matrix& queries, const Matrix& generated, std::size_t q, std::size_t k,
                    std::vector<double>& scratch, Matrix& out) {
    const std::size_t d = queries.cols();
    const double* query = queries.row(q);
    scratch.resize(generated.rows());
    for (std::size_t g = 0; g < generated.rows(); ++g) {
        const double* p = generated.row(g);
        double d2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double diff = query[i] - p[i];
            d2 += diff * diff;
        }
        scratch[g] = d2;
    }
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
    std::sort(scratch.begin(), scratch.begin() + k);
    for (std::size_t j = 0; j < k; ++j) out(q, j) = std::sqrt(scratch[j]);
}

}  // namespace detail

/// Exact brute-force Euclidean k nearest neighbors of every query among the
/// generated points. Rows are independent, so `jobs` > 1 splits the queries
/// across threads without changing any result.
inline DistanceMatrix knn_distances(const PointSet& queries, const PointSet& generated,
                                    std::size_t k, std::string label = "",
                                    std::size_t jobs = 1) {
    if (queries.dim() != generated.dim())
        throw ShapeError("knn_distances: query dim " + std::to_string(queries.dim()) +
                         " != generated dim " + std::to_string(generated.dim()));
    if (k < 1 || k > generated.size())
        throw ContractError("knn_distances: k=" + std::to_string(k) +
                            " outside [1, " + std::to_string(generated.size()) + "]");

    DistanceMatrix result;
    result.label = std::move(label);
    result.entries = Matrix(queries.size(), k);

    const std::size_t n = queries.size();
    if (jobs <= 1 || n < 2 * jobs) {
        std::vector<double> scratch;
        for (std::size_t q = 0; q < n; ++q)
            detail::knn_row(queries.points, generated.points, q, k, scratch, result.entries);
    } else {
        std::vector<std::thread> workers;
        const std::size_t chunk = (n + jobs - 1) / jobs;
        for (std::size_t w = 0; w < jobs; ++w) {
            const std::size_t begin = w * chunk, end = std::min(n, begin + chunk);
            if (begin >= end) break;
            workers.emplace_back([&, begin, end] {
                std::vector<double> scratch;
                for (std::size_t q = begin; q < end; ++q)
                    detail::knn_row(queries.points, generated.points, q, k, scratch,
                                    result.entries);
            });
        }
        for (auto& t : workers) t.join();
    }
    return result;
}

/// Mean of the j-th nearest distances (j is 1-based: j=1 is the nearest).
inline double mean_distance_at(const DistanceMatrix& m, std::size_t j) {
    if (j < 1 || j > m.k())
        throw ContractError("mean_distance_at: j=" + std::to_string(j) + " outside [1, " +
                            std::to_string(m.k()) + "]");
    if (m.queries() == 0) throw ContractError("mean_distance_at: empty matrix");
    double acc = 0.0;
    for (std::size_t i = 0; i < m.queries(); ++i) acc += m.entries(i, j - 1);
    return acc / static_cast<double>(m.queries());
}

}  // namespace ganlab
