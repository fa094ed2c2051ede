#pragma once

#include "msfda/numerics/mlp.hpp"

namespace msfda {

struct SgdConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-3;

  void validate() const;

  friend bool operator==(const SgdConfig&, const SgdConfig&) = default;
};

/// Momentum buffers for one parameter set.
struct OptimizerState {
  SgdConfig config;
  MlpParams velocity;

  OptimizerState() = default;
  OptimizerState(SgdConfig cfg, const MlpParams& params);
};

/// g' = g + wd * w;  v <- momentum * v + g';  w <- w - lr * v.
void sgd_step(MlpParams& params, const Gradients& grads, OptimizerState& state);

/// Same update with the gradient negated (gradient ascent).
void sgd_ascent_step(MlpParams& params, const Gradients& grads, OptimizerState& state);

}  // namespace msfda
