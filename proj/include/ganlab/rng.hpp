#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ganlab/matrix.hpp"

namespace ganlab {

/// splitmix64 step; the standard finalizer-style counter hash.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) {
    return splitmix64(seed ^ splitmix64(value));
}

/// FNV-1a over a byte string.
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

/// Derives an independent stream seed from a master seed, a stream name and a
/// counter. Streams are keyed by name, so adding a stream never shifts the
/// seeds of existing ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t counter = 0) {
    return mix_seed(mix_seed(master, fnv1a64(stream)), counter);
}

inline Matrix normal_matrix(std::size_t rows, std::size_t cols, double mean, double stddev,
                            std::mt19937_64& rng) {
    Matrix m(rows, cols);
    std::normal_distribution<double> dist(mean, stddev);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

}  // namespace ganlab
