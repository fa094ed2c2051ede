#include "msfda/pseudo/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "msfda/error.hpp"

namespace msfda {

bool Prototypes::any_valid() const {
  return std::any_of(valid.begin(), valid.end(), [](char v) { return v != 0; });
}

void ScheduleParams::validate() const {
  if (!(beta > 0.0)) throw ValidationError("pseudo", "beta must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("pseudo", "gamma must lie in (0, 1]");
}

Prototypes bootstrap_prototypes(const Matrix& features, const Matrix& probabilities) {
  if (features.rows() == 0) throw ValidationError("pseudo", "cannot bootstrap prototypes from no data");
  if (features.rows() != probabilities.rows()) throw ShapeError("features and predictions differ in rows");
  const std::size_t classes = probabilities.cols();
  Prototypes out{Matrix(classes, features.cols()), std::vector<char>(classes, 0)};
  for (std::size_t k = 0; k < classes; ++k) {
    double mass = 0.0;
    auto centroid = out.centroids.row(k);
    for (std::size_t i = 0; i < features.rows(); ++i) {
      const double w = probabilities(i, k);
      mass += w;
      auto f = features.row(i);
      for (std::size_t c = 0; c < centroid.size(); ++c) centroid[c] += w * f[c];
    }
    if (mass < kMinPrototypeMass) {
      std::fill(centroid.begin(), centroid.end(), 0.0);
      continue;
    }
    for (double& c : centroid) c /= mass;
    out.valid[k] = 1;
  }
  return out;
}

Prototypes bootstrap_prototypes(const SourceModel& model, const Dataset& target) {
  return bootstrap_prototypes(model.features(target.features), model.predict(target.features));
}

Prototypes compute_prototypes(const Matrix& features, std::span<const std::size_t> labeled,
                              std::span<const std::size_t> pseudo_labels,
                              const Prototypes& previous) {
  if (labeled.empty()) throw ValidationError("pseudo", "labeled subset is empty; bootstrap instead");
  if (labeled.size() != pseudo_labels.size()) throw ShapeError("one pseudo-label per labeled index required");
  const std::size_t classes = previous.num_classes();
  Matrix sums(classes, features.cols());
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t n = 0; n < labeled.size(); ++n) {
    const std::size_t k = pseudo_labels[n];
    if (k >= classes) throw ShapeError("pseudo-label out of range");
    auto f = features.row(labeled[n]);
    auto s = sums.row(k);
    for (std::size_t c = 0; c < s.size(); ++c) s[c] += f[c];
    ++counts[k];
  }
  Prototypes out = previous;
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] == 0) continue;
    auto dst = out.centroids.row(k);
    auto s = sums.row(k);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = s[c] / static_cast<double>(counts[k]);
    out.valid[k] = 1;
  }
  return out;
}

Prototypes compute_prototypes(const SourceModel& model, const Dataset& target,
                              const Partition& partition, const Prototypes& previous) {
  return compute_prototypes(model.features(target.features), partition.labeled,
                            partition.pseudo_labels, previous);
}

std::vector<double> prototype_distribution(std::span<const double> feature,
                                           const Prototypes& prototypes, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("pseudo", "temperature must be positive");
  if (!prototypes.any_valid()) throw ValidationError("pseudo", "no valid prototype; bootstrap first");
  const std::size_t classes = prototypes.num_classes();
  std::vector<double> q(classes, 0.0);
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < classes; ++k) {
    if (!prototypes.valid[k]) continue;
    q[k] = std::sqrt(squared_distance(feature, prototypes.centroids.row(k)));
    nearest = std::min(nearest, q[k]);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < classes; ++k) {
    q[k] = prototypes.valid[k] ? std::exp(-(q[k] - nearest) / temperature) : 0.0;
    total += q[k];
  }
  for (double& v : q) v /= total;
  return q;
}

Matrix prototype_distribution(const Matrix& features, const Prototypes& prototypes,
                              double temperature) {
  Matrix out(features.rows(), prototypes.num_classes());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto q = prototype_distribution(features.row(i), prototypes, temperature);
    std::copy(q.begin(), q.end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> confidence_scores(std::span<const double> h, std::span<const double> q) {
  if (h.size() != q.size()) throw ShapeError("confidence: h and q differ in length");
  std::vector<double> p(h.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = h[k] * q[k];
  return p;
}

Matrix confidence_scores(const Matrix& h, const Matrix& q) {
  if (!h.same_shape(q)) throw ShapeError("confidence: h and q differ in shape");
  Matrix p = h;
  auto pv = p.values();
  auto qv = q.values();
  for (std::size_t k = 0; k < pv.size(); ++k) pv[k] *= qv[k];
  return p;
}

std::vector<double> confidence_scores(const SourceModel& model, const Prototypes& prototypes,
                                      std::span<const double> x, double temperature) {
  const Matrix input = Matrix::row_vector(x);
  const Matrix h = model.predict(input);
  const auto q = prototype_distribution(model.features(input).row(0), prototypes, temperature);
  return confidence_scores(h.row(0), q);
}

DomainWeights domain_weights_from_entropies(std::span<const double> mean_entropies) {
  if (mean_entropies.empty()) throw ValidationError("pseudo", "domain weights need at least one model");
  const double lowest = *std::min_element(mean_entropies.begin(), mean_entropies.end());
  DomainWeights w{std::vector<double>(mean_entropies.size())};
  double total = 0.0;
  for (std::size_t j = 0; j < w.values.size(); ++j) {
    w.values[j] = std::exp(-(mean_entropies[j] - lowest));
    total += w.values[j];
  }
  for (double& v : w.values) v /= total;
  return w;
}

std::vector<double> mean_prediction_entropies(std::span<const SourceModel> models,
                                              const Dataset& target) {
  std::vector<double> out;
  for (const auto& model : models) {
    const Matrix h = model.predict(target.features);
    double total = 0.0;
    for (std::size_t i = 0; i < h.rows(); ++i) total += entropy(h.row(i));
    out.push_back(total / static_cast<double>(h.rows()));
  }
  return out;
}

DomainWeights domain_weights(std::span<const SourceModel> models, const Dataset& target) {
  if (models.empty()) throw ValidationError("pseudo", "domain weights need at least one model");
  target.validate();
  return domain_weights_from_entropies(mean_prediction_entropies(models, target));
}

FusedSample fuse_pseudo_label(std::span<const std::vector<double>> confidences,
                              const DomainWeights& weights) {
  if (confidences.size() != weights.size() || confidences.empty())
    throw ShapeError("fusion: one confidence vector per domain weight required");
  std::vector<double> fused(confidences.front().size(), 0.0);
  for (std::size_t j = 0; j < confidences.size(); ++j) {
    if (confidences[j].size() != fused.size()) throw ShapeError("fusion: class counts differ");
    for (std::size_t k = 0; k < fused.size(); ++k) fused[k] += weights[j] * confidences[j][k];
  }
  const std::size_t label = argmax(fused);
  return {label, fused[label]};
}

FusedLabels fuse_pseudo_labels(std::span<const Matrix> confidences, const DomainWeights& weights) {
  if (confidences.size() != weights.size() || confidences.empty())
    throw ShapeError("fusion: one confidence matrix per domain weight required");
  const std::size_t n = confidences.front().rows();
  const std::size_t classes = confidences.front().cols();
  FusedLabels out{std::vector<std::size_t>(n), std::vector<double>(n)};
  std::vector<double> fused(classes);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(fused.begin(), fused.end(), 0.0);
    for (std::size_t j = 0; j < confidences.size(); ++j) {
      if (!confidences[j].same_shape(confidences.front())) throw ShapeError("fusion: shapes differ");
      auto p = confidences[j].row(i);
      for (std::size_t k = 0; k < classes; ++k) fused[k] += weights[j] * p[k];
    }
    out.labels[i] = argmax(fused);
    out.scores[i] = fused[out.labels[i]];
  }
  return out;
}

Partition partition(const FusedLabels& fused, double alpha) {
  if (fused.labels.size() != fused.scores.size()) throw ShapeError("partition: labels and scores differ");
  Partition out;
  out.alpha = alpha;
  out.scores = fused.scores;
  out.fused_labels = fused.labels;
  for (std::size_t i = 0; i < fused.scores.size(); ++i) {
    if (fused.scores[i] > alpha) {
      out.labeled.push_back(i);
      out.pseudo_labels.push_back(fused.labels[i]);
    } else {
      out.unlabeled.push_back(i);
    }
  }
  return out;
}

double alpha_schedule(const ScheduleParams& params, std::size_t tau, std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("pseudo", "alpha schedule needs at least one score");
  double total = 0.0;
  for (double s : scores) total += s;
  const double mean = total / static_cast<double>(scores.size());
  return params.beta * std::pow(params.gamma, static_cast<double>(tau)) * mean;
}

}  // namespace msfda
