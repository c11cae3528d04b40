#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ganlab/errors.hpp"
#include "ganlab/matrix.hpp"
#include "ganlab/rng.hpp"

namespace ganlab {

struct Activation {
    enum class Kind { identity, relu, leaky_relu, sigmoid };

    Kind kind = Kind::identity;
    double slope = 0.2;  // used by leaky_relu only, must stay in (0,1)

    static Activation identity() { return {Kind::identity, 0.0}; }
    static Activation relu() { return {Kind::relu, 0.0}; }
    static Activation leaky_relu(double slope) { return {Kind::leaky_relu, slope}; }
    static Activation sigmoid() { return {Kind::sigmoid, 0.0}; }

    double apply(double z) const {
        switch (kind) {
            case Kind::identity: return z;
            case Kind::relu: return z > 0.0 ? z : 0.0;
            case Kind::leaky_relu: return z > 0.0 ? z : slope * z;
            case Kind::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        }
        return z;
    }

    /// Derivative at pre-activation z, given the already computed activation a.
    double derivative(double z, double a) const {
        switch (kind) {
            case Kind::identity: return 1.0;
            case Kind::relu: return z > 0.0 ? 1.0 : 0.0;
            case Kind::leaky_relu: return z > 0.0 ? 1.0 : slope;
            case Kind::sigmoid: return a * (1.0 - a);
        }
        return 1.0;
    }
};

/// One dense layer: y = activation(W x + b), W is [out x in].
struct Layer {
    Matrix weight;
    std::vector<double> bias;
    Activation activation;

    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }
};

/// Parameters of a multilayer dense network.
struct MlpParams {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    void validate() const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const Layer& l = layers[i];
            if (l.bias.size() != l.out_dim())
                throw ShapeError("mlp: layer " + std::to_string(i) + " bias size " +
                                 std::to_string(l.bias.size()) + " != out dim " +
                                 std::to_string(l.out_dim()));
            if (i > 0 && layers[i - 1].out_dim() != l.in_dim())
                throw ShapeError("mlp: layer " + std::to_string(i) + " in dim " +
                                 std::to_string(l.in_dim()) + " does not chain with previous out dim " +
                                 std::to_string(layers[i - 1].out_dim()));
            if (l.activation.kind == Activation::Kind::leaky_relu &&
                !(l.activation.slope > 0.0 && l.activation.slope < 1.0))
                throw ContractError("mlp: layer " + std::to_string(i) +
                                    " leaky_relu slope must be in (0,1)");
            if (!l.weight.all_finite())
                throw ContractError("mlp: layer " + std::to_string(i) + " has non-finite weights");
            for (double b : l.bias)
                if (!std::isfinite(b))
                    throw ContractError("mlp: layer " + std::to_string(i) + " has non-finite bias");
        }
    }

    bool same_shape(const MlpParams& other) const {
        if (layers.size() != other.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (!layers[i].weight.same_shape(other.layers[i].weight)) return false;
            if (layers[i].bias.size() != other.layers[i].bias.size()) return false;
        }
        return true;
    }

    bool operator==(const MlpParams& other) const {
        if (layers.size() != other.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (!(layers[i].weight == other.layers[i].weight)) return false;
            if (layers[i].bias != other.layers[i].bias) return false;
            if (layers[i].activation.kind != other.layers[i].activation.kind) return false;
            if (layers[i].activation.kind == Activation::Kind::leaky_relu &&
                layers[i].activation.slope != other.layers[i].activation.slope)
                return false;
        }
        return true;
    }
};

/// Gradients mirroring an MlpParams shape.
struct GradientSet {
    struct LayerGrad {
        Matrix d_weight;
        std::vector<double> d_bias;
    };
    std::vector<LayerGrad> layers;

    static GradientSet zeros_like(const MlpParams& params) {
        GradientSet g;
        g.layers.reserve(params.layers.size());
        for (const auto& l : params.layers)
            g.layers.push_back({Matrix(l.out_dim(), l.in_dim()),
                                std::vector<double>(l.out_dim(), 0.0)});
        return g;
    }

    void add(const GradientSet& other) {
        if (layers.size() != other.layers.size())
            throw ShapeError("GradientSet::add: layer count mismatch");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto& a = layers[i];
            const auto& b = other.layers[i];
            if (!a.d_weight.same_shape(b.d_weight) || a.d_bias.size() != b.d_bias.size())
                throw ShapeError("GradientSet::add: layer " + std::to_string(i) + " shape mismatch");
            for (std::size_t k = 0; k < a.d_weight.size(); ++k)
                a.d_weight.data()[k] += b.d_weight.data()[k];
            for (std::size_t k = 0; k < a.d_bias.size(); ++k) a.d_bias[k] += b.d_bias[k];
        }
    }
};

/// Intermediates retained by mlp_forward for the backward pass.
struct ForwardCache {
    Matrix input;                 // [n x in]
    std::vector<Matrix> pre;      // pre-activations per layer, [n x out_l]
    std::vector<Matrix> post;     // activations per layer
    std::size_t layer_count = 0;

    bool matches(const MlpParams& params, const Matrix& upstream) const {
        if (layer_count != params.layers.size()) return false;
        if (pre.size() != layer_count || post.size() != layer_count) return false;
        if (layer_count == 0) return true;
        if (input.cols() != params.input_dim()) return false;
        for (std::size_t i = 0; i < layer_count; ++i) {
            if (pre[i].rows() != input.rows() || pre[i].cols() != params.layers[i].out_dim())
                return false;
        }
        return upstream.rows() == input.rows() && upstream.cols() == params.output_dim();
    }
};

/// Forward pass over a batch (rows are samples). Deterministic for fixed
/// params and inputs; pass a cache to enable mlp_backward.
inline Matrix mlp_forward(const MlpParams& params, const Matrix& inputs,
                          ForwardCache* cache = nullptr) {
    if (params.layers.empty()) throw ContractError("mlp_forward: network has no layers");
    if (inputs.cols() != params.input_dim())
        throw ShapeError("mlp_forward: input width " + std::to_string(inputs.cols()) +
                         " != first layer in dim " + std::to_string(params.input_dim()));

    if (cache) {
        cache->input = inputs;
        cache->pre.clear();
        cache->post.clear();
        cache->layer_count = params.layers.size();
    }

    const std::size_t n = inputs.rows();
    Matrix current = inputs;
    for (const Layer& layer : params.layers) {
        const std::size_t out = layer.out_dim(), in = layer.in_dim();
        Matrix pre(n, out);
        for (std::size_t s = 0; s < n; ++s) {
            const double* x = current.row(s);
            double* z = pre.row(s);
            for (std::size_t o = 0; o < out; ++o) {
                const double* w = layer.weight.row(o);
                double acc = layer.bias[o];
                for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
                z[o] = acc;
            }
        }
        Matrix post(n, out);
        for (std::size_t k = 0; k < pre.size(); ++k)
            post.data()[k] = layer.activation.apply(pre.data()[k]);
        if (cache) {
            cache->pre.push_back(pre);
            cache->post.push_back(post);
        }
        current = std::move(post);
    }
    return current;
}

/// Reverse-mode gradients for a batch. `output_grad` is dLoss/dOutput, shaped
/// like the forward result. Optionally also yields dLoss/dInput.
inline GradientSet mlp_backward(const MlpParams& params, const ForwardCache& cache,
                                const Matrix& output_grad, Matrix* input_grad = nullptr) {
    if (!cache.matches(params, output_grad))
        throw ContractError("mlp_backward: cache does not match params/upstream "
                            "(was it produced by mlp_forward on the same network?)");

    const std::size_t n = cache.input.rows();
    GradientSet grads = GradientSet::zeros_like(params);
    Matrix delta = output_grad;  // gradient w.r.t. current layer's activations

    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const Layer& layer = params.layers[li];
        const Matrix& pre = cache.pre[li];
        const Matrix& post = cache.post[li];
        const Matrix& x = (li == 0) ? cache.input : cache.post[li - 1];
        const std::size_t out = layer.out_dim(), in = layer.in_dim();

        // through the activation
        for (std::size_t k = 0; k < delta.size(); ++k)
            delta.data()[k] *= layer.activation.derivative(pre.data()[k], post.data()[k]);

        auto& g = grads.layers[li];
        for (std::size_t s = 0; s < n; ++s) {
            const double* d = delta.row(s);
            const double* xs = x.row(s);
            for (std::size_t o = 0; o < out; ++o) {
                double* gw = g.d_weight.row(o);
                for (std::size_t i = 0; i < in; ++i) gw[i] += d[o] * xs[i];
                g.d_bias[o] += d[o];
            }
        }

        if (li > 0 || input_grad) {
            Matrix down(n, in);
            for (std::size_t s = 0; s < n; ++s) {
                const double* d = delta.row(s);
                double* dn = down.row(s);
                for (std::size_t o = 0; o < out; ++o) {
                    const double* w = layer.weight.row(o);
                    for (std::size_t i = 0; i < in; ++i) dn[i] += d[o] * w[i];
                }
            }
            if (li == 0 && input_grad) *input_grad = std::move(down);
            else delta = std::move(down);
        }
    }
    return grads;
}

/// Builds a dense network with the given layer widths. Hidden layers use
/// `hidden`, the last layer uses `output`. Weights ~ Normal(0, init_std),
/// biases zero.
inline MlpParams make_mlp(const std::vector<std::size_t>& widths, Activation hidden,
                          Activation output, double init_std, std::uint64_t seed) {
    if (widths.size() < 2) throw ContractError("make_mlp: need at least input and output widths");
    std::mt19937_64 rng(seed);
    MlpParams params;
    params.layers.reserve(widths.size() - 1);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        Layer layer;
        layer.weight = normal_matrix(widths[i + 1], widths[i], 0.0, init_std, rng);
        layer.bias.assign(widths[i + 1], 0.0);
        layer.activation = (i + 2 == widths.size()) ? output : hidden;
        params.layers.push_back(std::move(layer));
    }
    params.validate();
    return params;
}

}  // namespace ganlab
