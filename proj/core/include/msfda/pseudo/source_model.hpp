#pragma once

#include <cstddef>
#include <string>

#include "msfda/numerics/matrix.hpp"
#include "msfda/numerics/mlp.hpp"

namespace msfda {

/// A pretrained source model h = g o f. Only the extractor f is trained
/// during adaptation; the classifier g stays frozen.
struct SourceModel {
  MlpParams extractor;
  MlpParams classifier;
  std::string domain;

  std::size_t feature_dim() const { return extractor.output_dim(); }
  std::size_t num_classes() const { return classifier.output_dim(); }
  std::size_t input_dim() const { return extractor.input_dim(); }

  /// Throws ShapeError unless extractor output feeds the classifier.
  void validate() const;

  Matrix features(const Matrix& inputs) const { return forward_mlp(extractor, inputs); }
  Matrix logits(const Matrix& inputs) const;
  /// Row-stochastic class probabilities.
  Matrix predict(const Matrix& inputs) const;

  friend bool operator==(const SourceModel&, const SourceModel&) = default;
};

}  // namespace msfda
