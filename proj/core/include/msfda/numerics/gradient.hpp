#pragma once

#include <functional>
#include <span>
#include <vector>

#include "msfda/numerics/autodiff.hpp"
#include "msfda/numerics/mlp.hpp"

namespace msfda {

/// Builds a scalar loss on `tape` from the bound parameter sets.
using LossBuilder = std::function<ad::Var(ad::Tape& tape, std::span<const MlpVars> params)>;

struct GradResult {
  double value = 0.0;
  std::vector<Gradients> gradients;  // one per parameter set
};

double evaluate_loss(const LossBuilder& loss, std::span<const MlpParams> params);

/// Reverse-mode derivatives of the loss with respect to every parameter set.
GradResult grad(const LossBuilder& loss, std::span<const MlpParams> params);

/// Max over every parameter entry of
///   |analytic - central| / (|analytic| + |central| + 1e-12)
/// using central differences with the given step.
double finite_diff_check(const LossBuilder& loss, std::span<const MlpParams> params,
                         double step);

}  // namespace msfda
