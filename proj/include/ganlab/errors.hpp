#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ganlab {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension or layout mismatch between tensors, layers or point sets.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(what) {}
};

/// A precondition of an operation was violated by the caller
/// (stale forward cache, empty score vector, bad ratio, ...).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(what) {}
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t layer, long epoch = -1, long batch = -1)
        : Error(what), layer_index(layer), epoch(epoch), batch(batch) {}

    std::size_t layer_index;  ///< offending layer, or size_t(-1) when not layer specific
    long epoch;               ///< -1 when outside a training loop
    long batch;
};

/// Invalid experiment configuration; carries one message per problem found.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> problems)
        : Error(join(problems)), items(std::move(problems)) {}
    explicit ValidationError(const std::string& what)
        : Error(what), items{what} {}

    std::vector<std::string> items;

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (const auto& s : v) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out.empty() ? std::string("invalid configuration") : out;
    }
};

/// File could not be read, written or parsed.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace ganlab
