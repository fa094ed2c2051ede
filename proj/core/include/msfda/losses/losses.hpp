#pragma once

#include <cstddef>
#include <span>

#include "msfda/numerics/autodiff.hpp"
#include "msfda/numerics/mlp.hpp"
#include "msfda/pseudo/source_model.hpp"

namespace msfda {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kLogitClamp = 30.0;

struct LossWeights {
  double info_max = 1.0;
  double adversarial = 1.0;

  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Feature-space discriminator: an MLP ending in one logit, squashed by a
/// logistic after clamping the logit to +/-30.
struct Discriminator {
  MlpParams net;

  /// Probability that each feature row came from the labeled subset.
  Matrix probability(const Matrix& features) const;
};

Discriminator make_discriminator(std::size_t feature_dim, std::size_t hidden, Rng& rng);

// Tape builders. `extractor` is normally trainable and `classifier` a
// constant binding of the frozen classifier.

ad::Var class_probabilities(const MlpVars& extractor, const MlpVars& classifier, ad::Var inputs);

/// -(1/n) sum_i log max(h_{y_i}(x_i), 1e-12)
ad::Var cross_entropy(ad::Var probabilities, std::span<const std::size_t> labels);

/// mean_i H(h(x_i)) + sum_k pbar_k log pbar_k, i.e. mean entropy minus the
/// entropy of the batch-mean prediction.
ad::Var info_max(ad::Var probabilities);

/// mean_l ln d(f(x)) + mean_u ln(1 - d(f(x))). Zero when `unlabeled_features`
/// has no rows.
ad::Var adversarial(const MlpVars& discriminator, ad::Var labeled_features,
                    ad::Var unlabeled_features);

/// A minibatch drawn from the labeled and unlabeled subsets.
struct AdaptationBatch {
  Matrix labeled_inputs;
  std::vector<std::size_t> pseudo_labels;
  Matrix unlabeled_inputs;  // may have zero rows
};

struct LossBreakdown {
  double cross_entropy = 0.0;
  double info_max = 0.0;
  double adversarial = 0.0;
  double joint = 0.0;
};

/// CE + lambda_IM * IM + lambda_adv * ADV on `tape`; fills `parts` if given.
ad::Var joint_feature_loss(const MlpVars& extractor, const MlpVars& classifier,
                           const MlpVars& discriminator, const AdaptationBatch& batch,
                           const LossWeights& weights, LossBreakdown* parts = nullptr);

// Value-only conveniences.

double cross_entropy(const SourceModel& model, const Matrix& inputs,
                     std::span<const std::size_t> labels);
double info_max(const SourceModel& model, const Matrix& inputs);
double adversarial(const SourceModel& model, const Discriminator& disc,
                   const Matrix& labeled_inputs, const Matrix& unlabeled_inputs);
LossBreakdown joint_feature_loss(const SourceModel& model, const Discriminator& disc,
                                 const AdaptationBatch& batch, const LossWeights& weights);

}  // namespace msfda
