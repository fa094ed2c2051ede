#include "msfda/losses/losses.hpp"

#include <algorithm>
#include <cmath>

#include "msfda/error.hpp"

namespace msfda {

void LossWeights::validate() const {
  if (!(info_max >= 0.0) || !(adversarial >= 0.0))
    throw ValidationError("losses", "loss weights must be non-negative");
}

Discriminator make_discriminator(std::size_t feature_dim, std::size_t hidden, Rng& rng) {
  const std::size_t dims[] = {feature_dim, hidden, 1};
  return Discriminator{make_mlp(dims, rng)};
}

Matrix Discriminator::probability(const Matrix& features) const {
  Matrix out = forward_mlp(net, features);
  for (double& z : out.values()) z = 1.0 / (1.0 + std::exp(-std::clamp(z, -kLogitClamp, kLogitClamp)));
  return out;
}

ad::Var class_probabilities(const MlpVars& extractor, const MlpVars& classifier, ad::Var inputs) {
  return ad::softmax_rows(forward(classifier, forward(extractor, inputs)));
}

ad::Var cross_entropy(ad::Var probabilities, std::span<const std::size_t> labels) {
  if (probabilities.rows() == 0) throw ValidationError("losses", "cross-entropy on an empty batch");
  return -ad::mean(ad::log_floor(ad::pick(probabilities, labels), kProbabilityFloor));
}

ad::Var info_max(ad::Var probabilities) {
  if (probabilities.rows() == 0) throw ValidationError("losses", "information maximization on an empty batch");
  const std::size_t n = probabilities.rows();
  auto plogp = ad::mul(probabilities, ad::log_floor(probabilities, kProbabilityFloor));
  auto mean_entropy = -ad::scale(ad::sum(plogp), 1.0 / static_cast<double>(n));
  auto pbar = ad::mean_rows(probabilities);
  auto neg_marginal_entropy = ad::sum(ad::mul(pbar, ad::log_floor(pbar, kProbabilityFloor)));
  return mean_entropy + neg_marginal_entropy;
}

ad::Var adversarial(const MlpVars& discriminator, ad::Var labeled_features,
                    ad::Var unlabeled_features) {
  ad::Tape& tape = *labeled_features.tape;
  if (unlabeled_features.rows() == 0 || labeled_features.rows() == 0) return tape.constant(Matrix(1, 1));
  auto logit = [&](ad::Var f) { return ad::clamp(forward(discriminator, f), -kLogitClamp, kLogitClamp); };
  auto on_labeled = ad::mean(ad::log_sigmoid(logit(labeled_features)));
  // ln(1 - sigma(z)) = ln sigma(-z)
  auto on_unlabeled = ad::mean(ad::log_sigmoid(-logit(unlabeled_features)));
  return on_labeled + on_unlabeled;
}

ad::Var joint_feature_loss(const MlpVars& extractor, const MlpVars& classifier,
                           const MlpVars& discriminator, const AdaptationBatch& batch,
                           const LossWeights& weights, LossBreakdown* parts) {
  ad::Tape& tape = *extractor.weights.front().tape;
  auto features_l = forward(extractor, tape.constant(batch.labeled_inputs));
  auto probs = ad::softmax_rows(forward(classifier, features_l));
  auto ce = cross_entropy(probs, batch.pseudo_labels);
  auto total = ce;
  ad::Var im = info_max(probs);
  if (weights.info_max != 0.0) total = total + ad::scale(im, weights.info_max);
  ad::Var adv = tape.constant(Matrix(1, 1));
  if (batch.unlabeled_inputs.rows() > 0) {
    auto features_u = forward(extractor, tape.constant(batch.unlabeled_inputs));
    adv = adversarial(discriminator, features_l, features_u);
    if (weights.adversarial != 0.0) total = total + ad::scale(adv, weights.adversarial);
  }
  if (parts) {
    parts->cross_entropy = ce.value()(0, 0);
    parts->info_max = im.value()(0, 0);
    parts->adversarial = adv.value()(0, 0);
    parts->joint = total.value()(0, 0);
  }
  return total;
}

double cross_entropy(const SourceModel& model, const Matrix& inputs,
                     std::span<const std::size_t> labels) {
  ad::Tape tape;
  auto f = bind(tape, model.extractor, false);
  auto g = bind(tape, model.classifier, false);
  return cross_entropy(class_probabilities(f, g, tape.constant(inputs)), labels).value()(0, 0);
}

double info_max(const SourceModel& model, const Matrix& inputs) {
  ad::Tape tape;
  auto f = bind(tape, model.extractor, false);
  auto g = bind(tape, model.classifier, false);
  return info_max(class_probabilities(f, g, tape.constant(inputs))).value()(0, 0);
}

double adversarial(const SourceModel& model, const Discriminator& disc,
                   const Matrix& labeled_inputs, const Matrix& unlabeled_inputs) {
  ad::Tape tape;
  auto f = bind(tape, model.extractor, false);
  auto d = bind(tape, disc.net, false);
  auto fl = forward(f, tape.constant(labeled_inputs));
  if (unlabeled_inputs.rows() == 0) return 0.0;
  auto fu = forward(f, tape.constant(unlabeled_inputs));
  return adversarial(d, fl, fu).value()(0, 0);
}

LossBreakdown joint_feature_loss(const SourceModel& model, const Discriminator& disc,
                                 const AdaptationBatch& batch, const LossWeights& weights) {
  ad::Tape tape;
  auto f = bind(tape, model.extractor, false);
  auto g = bind(tape, model.classifier, false);
  auto d = bind(tape, disc.net, false);
  LossBreakdown parts;
  joint_feature_loss(f, g, d, batch, weights, &parts);
  return parts;
}

}  // namespace msfda
