#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ganlab/errors.hpp"
#include "ganlab/mlp.hpp"

namespace ganlab {

/// Adam hyperparameters. Defaults are the usual adversarial-training setting.
struct AdamConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment estimates for every parameter of one network.
struct OptimizerState {
    struct LayerMoments {
        Matrix m_weight, v_weight;
        std::vector<double> m_bias, v_bias;
    };

    AdamConfig config;
    std::vector<LayerMoments> layers;
    long step_count = 0;

    static OptimizerState create(const MlpParams& params, const AdamConfig& config = {}) {
        OptimizerState state;
        state.config = config;
        state.layers.reserve(params.layers.size());
        for (const auto& l : params.layers)
            state.layers.push_back({Matrix(l.out_dim(), l.in_dim()),
                                    Matrix(l.out_dim(), l.in_dim()),
                                    std::vector<double>(l.out_dim(), 0.0),
                                    std::vector<double>(l.out_dim(), 0.0)});
        return state;
    }
};

namespace detail {

inline void adam_update(double g, double& m, double& v, double& param, double corr1,
                        double corr2, const AdamConfig& c) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / corr1;
    const double v_hat = v / corr2;
    param -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
}

}  // namespace detail

/// One bias-corrected Adam step. Shapes must be congruent; a non-finite
/// gradient raises DivergenceError carrying the offending layer index.
inline void adam_step(MlpParams& params, const GradientSet& grads, OptimizerState& state) {
    if (grads.layers.size() != params.layers.size() || state.layers.size() != params.layers.size())
        throw ShapeError("adam_step: layer count mismatch");

    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        const auto& g = grads.layers[li];
        const auto& l = params.layers[li];
        if (!g.d_weight.same_shape(l.weight) || g.d_bias.size() != l.bias.size())
            throw ShapeError("adam_step: layer " + std::to_string(li) + " gradient shape mismatch");
        if (!g.d_weight.all_finite())
            throw DivergenceError("adam_step: non-finite weight gradient in layer " +
                                  std::to_string(li), li);
        for (double b : g.d_bias)
            if (!std::isfinite(b))
                throw DivergenceError("adam_step: non-finite bias gradient in layer " +
                                      std::to_string(li), li);
    }

    const AdamConfig& c = state.config;
    const long t = ++state.step_count;
    const double corr1 = 1.0 - std::pow(c.beta1, t);
    const double corr2 = 1.0 - std::pow(c.beta2, t);

    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        Layer& l = params.layers[li];
        const auto& g = grads.layers[li];
        auto& s = state.layers[li];
        for (std::size_t k = 0; k < l.weight.size(); ++k)
            detail::adam_update(g.d_weight.data()[k], s.m_weight.data()[k], s.v_weight.data()[k],
                                l.weight.data()[k], corr1, corr2, c);
        for (std::size_t k = 0; k < l.bias.size(); ++k)
            detail::adam_update(g.d_bias[k], s.m_bias[k], s.v_bias[k], l.bias[k], corr1, corr2, c);
    }
}

}  // namespace ganlab
