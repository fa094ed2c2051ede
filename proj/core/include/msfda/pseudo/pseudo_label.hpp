#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "msfda/data/dataset.hpp"
#include "msfda/numerics/matrix.hpp"
#include "msfda/pseudo/source_model.hpp"

namespace msfda {

/// Per-class feature centroids of one source model.
struct Prototypes {
  Matrix centroids;  // K x feature_dim
  std::vector<char> valid;

  std::size_t num_classes() const { return centroids.rows(); }
  bool any_valid() const;

  friend bool operator==(const Prototypes&, const Prototypes&) = default;
};

/// Simplex weights over the source models.
struct DomainWeights {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
};

/// Split of the target indices into a pseudo-labeled and an unlabeled set.
struct Partition {
  static constexpr double kNoThreshold = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::size_t> labeled;         // ascending target indices
  std::vector<std::size_t> pseudo_labels;   // aligned with `labeled`
  std::vector<std::size_t> unlabeled;       // ascending target indices
  double alpha = kNoThreshold;              // NaN when no threshold was used
  std::vector<double> scores;               // fused score per target sample
  std::vector<std::size_t> fused_labels;    // fused pseudo-label per target sample

  std::size_t size() const { return labeled.size() + unlabeled.size(); }
};

struct ScheduleParams {
  double beta = 0.5;
  double gamma = 0.8;

  void validate() const;

  friend bool operator==(const ScheduleParams&, const ScheduleParams&) = default;
};

/// Fused pseudo-labels and confidence for every target sample.
struct FusedLabels {
  std::vector<std::size_t> labels;
  std::vector<double> scores;
};

inline constexpr double kMinPrototypeMass = 1e-9;

/// Soft centroids over all target data weighted by the model's own
/// predictions. Classes with total soft mass below 1e-9 are invalid.
Prototypes bootstrap_prototypes(const Matrix& features, const Matrix& probabilities);
Prototypes bootstrap_prototypes(const SourceModel& model, const Dataset& target);

/// Hard centroids over the labeled subset. Classes absent from the subset
/// keep `previous`. Throws ValidationError when the subset is empty; the
/// caller falls back to bootstrap_prototypes.
Prototypes compute_prototypes(const Matrix& features, std::span<const std::size_t> labeled,
                              std::span<const std::size_t> pseudo_labels,
                              const Prototypes& previous);
Prototypes compute_prototypes(const SourceModel& model, const Dataset& target,
                              const Partition& partition, const Prototypes& previous);

/// q_k proportional to exp(-||f - eta_k|| / temperature) over valid classes;
/// invalid classes get 0. Throws ValidationError when no class is valid.
std::vector<double> prototype_distribution(std::span<const double> feature,
                                           const Prototypes& prototypes, double temperature);
/// Row-wise version over a feature matrix.
Matrix prototype_distribution(const Matrix& features, const Prototypes& prototypes,
                              double temperature);

/// p_k = h_k * q_k (not renormalized).
std::vector<double> confidence_scores(std::span<const double> h, std::span<const double> q);
Matrix confidence_scores(const Matrix& h, const Matrix& q);
/// h(x) and q(x) for a single input row of `model`.
std::vector<double> confidence_scores(const SourceModel& model, const Prototypes& prototypes,
                                      std::span<const double> x, double temperature);

/// softmax_j(-mean_entropy_j).
DomainWeights domain_weights_from_entropies(std::span<const double> mean_entropies);
/// Mean natural-log prediction entropy of each model over the target.
std::vector<double> mean_prediction_entropies(std::span<const SourceModel> models,
                                              const Dataset& target);
DomainWeights domain_weights(std::span<const SourceModel> models, const Dataset& target);

struct FusedSample {
  std::size_t label = 0;
  double score = 0.0;
};

/// argmax_k and max_k of sum_j w_j p^j_k; ties go to the smallest class.
FusedSample fuse_pseudo_label(std::span<const std::vector<double>> confidences,
                              const DomainWeights& weights);
/// Row-wise fusion of one confidence matrix per model.
FusedLabels fuse_pseudo_labels(std::span<const Matrix> confidences, const DomainWeights& weights);

/// Sample i is labeled iff score_i > alpha (strict).
Partition partition(const FusedLabels& fused, double alpha);

/// beta * gamma^tau * mean(scores).
double alpha_schedule(const ScheduleParams& params, std::size_t tau, std::span<const double> scores);

}  // namespace msfda
