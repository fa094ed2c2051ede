#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "msfda/numerics/autodiff.hpp"
#include "msfda/numerics/matrix.hpp"
#include "msfda/numerics/rng.hpp"

namespace msfda {

enum class Activation { relu, linear };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

/// Affine layer y = x W + b followed by an activation. `weight` is in x out,
/// `bias` is 1 x out.
struct DenseLayer {
  Matrix weight;
  Matrix bias;
  Activation activation = Activation::linear;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  /// Throws ShapeError unless consecutive layer shapes compose.
  void validate() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Gradients share the layout of the parameters they differentiate.
using Gradients = MlpParams;

/// Rectifier on hidden layers, linear output. Weights use He-uniform init,
/// biases start at zero.
MlpParams make_mlp(std::span<const std::size_t> dims, Rng& rng);

/// Single linear layer with the given weight and bias.
MlpParams make_affine(Matrix weight, Matrix bias);

Gradients zeros_like(const MlpParams& params);

Matrix forward_mlp(const MlpParams& params, const Matrix& inputs);

/// Parameters bound onto a tape, either as differentiable leaves or constants.
struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
  std::vector<Activation> activations;
};

MlpVars bind(ad::Tape& tape, const MlpParams& params, bool trainable);
ad::Var forward(const MlpVars& net, ad::Var inputs);
Gradients collect_gradients(const ad::Tape& tape, const MlpVars& net);

/// Visits every parameter matrix of `params` in a fixed order.
template <typename Params, typename Fn>
void for_each_matrix(Params& params, Fn&& fn) {
  for (auto& layer : params.layers) {
    fn(layer.weight);
    fn(layer.bias);
  }
}

}  // namespace msfda
