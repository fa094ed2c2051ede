#include "msfda/numerics/optimizer.hpp"

#include "msfda/error.hpp"

namespace msfda {

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("numerics", "learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ValidationError("numerics", "momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ValidationError("numerics", "weight decay must be >= 0");
}

OptimizerState::OptimizerState(SgdConfig cfg, const MlpParams& params)
    : config(cfg), velocity(zeros_like(params)) {
  config.validate();
}

namespace {

void update(MlpParams& params, const Gradients& grads, OptimizerState& state, double sign) {
  if (params.layers.size() != grads.layers.size() ||
      params.layers.size() != state.velocity.layers.size()) {
    throw ShapeError("optimizer: parameter, gradient and buffer layouts differ");
  }
  const auto& cfg = state.config;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto step = [&](Matrix& w, const Matrix& g, Matrix& v) {
      if (!w.same_shape(g) || !w.same_shape(v)) throw ShapeError("optimizer: shape mismatch");
      auto wv = w.values();
      auto gv = g.values();
      auto vv = v.values();
      for (std::size_t k = 0; k < wv.size(); ++k) {
        const double effective = sign * gv[k] + cfg.weight_decay * wv[k];
        vv[k] = cfg.momentum * vv[k] + effective;
        wv[k] -= cfg.learning_rate * vv[k];
      }
    };
    step(params.layers[l].weight, grads.layers[l].weight, state.velocity.layers[l].weight);
    step(params.layers[l].bias, grads.layers[l].bias, state.velocity.layers[l].bias);
  }
}

}  // namespace

void sgd_step(MlpParams& params, const Gradients& grads, OptimizerState& state) {
  update(params, grads, state, 1.0);
}

void sgd_ascent_step(MlpParams& params, const Gradients& grads, OptimizerState& state) {
  update(params, grads, state, -1.0);
}

}  // namespace msfda
