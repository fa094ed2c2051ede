#include "msfda/numerics/mlp.hpp"

#include <cmath>
#include <string>

#include "msfda/error.hpp"

namespace msfda {

std::string_view to_string(Activation activation) {
  return activation == Activation::relu ? "relu" : "linear";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "linear") return Activation::linear;
  throw ParseError("numerics", "unknown activation tag '" + std::string(name) + "'");
}

std::size_t MlpParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().weight.rows();
}

std::size_t MlpParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().weight.cols();
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.weight.rows() == 0 || layer.weight.cols() == 0)
      throw ShapeError("layer " + std::to_string(i) + " has an empty weight");
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols())
      throw ShapeError("layer " + std::to_string(i) + " bias does not match its weight");
    if (i > 0 && layers[i - 1].weight.cols() != layer.weight.rows())
      throw ShapeError("layer " + std::to_string(i) + " input does not match previous output");
  }
}

MlpParams make_mlp(std::span<const std::size_t> dims, Rng& rng) {
  if (dims.size() < 2) throw ShapeError("an MLP needs at least input and output dims");
  MlpParams params;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t in = dims[i], out = dims[i + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> init(-bound, bound);
    DenseLayer layer{Matrix(in, out), Matrix(1, out),
                     i + 2 < dims.size() ? Activation::relu : Activation::linear};
    for (double& w : layer.weight.values()) w = init(rng);
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

MlpParams make_affine(Matrix weight, Matrix bias) {
  MlpParams params;
  params.layers.push_back(DenseLayer{std::move(weight), std::move(bias), Activation::linear});
  params.validate();
  return params;
}

Gradients zeros_like(const MlpParams& params) {
  Gradients g = params;
  for_each_matrix(g, [](Matrix& m) {
    for (double& v : m.values()) v = 0.0;
  });
  return g;
}

Matrix forward_mlp(const MlpParams& params, const Matrix& inputs) {
  if (inputs.cols() != params.input_dim()) {
    throw ShapeError("network expects input width " + std::to_string(params.input_dim()) +
                     ", got " + std::to_string(inputs.cols()));
  }
  Matrix x = inputs;
  for (const auto& layer : params.layers) {
    Matrix y = matmul(x, layer.weight);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      auto row = y.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] += layer.bias(0, j);
        if (layer.activation == Activation::relu && !(row[j] > 0.0)) row[j] = 0.0;
      }
    }
    x = std::move(y);
  }
  return x;
}

MlpVars bind(ad::Tape& tape, const MlpParams& params, bool trainable) {
  MlpVars vars;
  for (const auto& layer : params.layers) {
    vars.weights.push_back(trainable ? tape.variable(layer.weight) : tape.constant(layer.weight));
    vars.biases.push_back(trainable ? tape.variable(layer.bias) : tape.constant(layer.bias));
    vars.activations.push_back(layer.activation);
  }
  return vars;
}

ad::Var forward(const MlpVars& net, ad::Var inputs) {
  ad::Var x = inputs;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    x = ad::add_row(ad::matmul(x, net.weights[i]), net.biases[i]);
    if (net.activations[i] == Activation::relu) x = ad::relu(x);
  }
  return x;
}

Gradients collect_gradients(const ad::Tape& tape, const MlpVars& net) {
  Gradients g;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    g.layers.push_back(DenseLayer{tape.gradient(net.weights[i]), tape.gradient(net.biases[i]),
                                  net.activations[i]});
  }
  return g;
}

}  // namespace msfda
