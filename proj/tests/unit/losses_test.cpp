#include <gtest/gtest.h>

#include <cmath>

#include "msfda/error.hpp"
#include "msfda/losses/losses.hpp"
#include "msfda/numerics/gradient.hpp"
#include "msfda/numerics/optimizer.hpp"
#include "msfda/numerics/rng.hpp"

using msfda::Matrix;
namespace ad = msfda::ad;

namespace {

double value(ad::Var v) { return v.value()(0, 0); }

// Extractor = identity so logits = inputs and features = inputs.
msfda::SourceModel logit_model(std::size_t k) {
  return {msfda::make_affine(Matrix::identity(k), Matrix(1, k, 0.0)),
          msfda::make_affine(Matrix::identity(k), Matrix(1, k, 0.0)), "m"};
}

// Discriminator with zero weights: constant logit b.
msfda::Discriminator constant_disc(std::size_t dim, double logit) {
  return {msfda::make_affine(Matrix(dim, 1, 0.0), Matrix(1, 1, logit))};
}

}  // namespace

TEST(CrossEntropy, PerfectFitIsZero) {
  ad::Tape tape;
  const std::size_t labels[] = {0, 2};
  EXPECT_EQ(value(msfda::cross_entropy(tape.constant(Matrix::from_rows({{1, 0, 0}, {0, 0, 1}})), labels)), 0.0);
}

TEST(CrossEntropy, UniformIsLogK) {
  ad::Tape tape;
  const std::size_t labels[] = {0, 1, 3};
  EXPECT_NEAR(value(msfda::cross_entropy(tape.constant(Matrix(3, 4, 0.25)), labels)), std::log(4.0), 1e-15);
}

TEST(CrossEntropy, QuarterProbabilityIsLogFour) {
  ad::Tape tape;
  const std::size_t labels[] = {1};
  EXPECT_NEAR(value(msfda::cross_entropy(tape.constant(Matrix::from_rows({{0.75, 0.25}})), labels)), 1.3863, 1e-4);
}

TEST(CrossEntropy, EmptyBatchRejected) {
  ad::Tape tape;
  EXPECT_THROW(msfda::cross_entropy(tape.constant(Matrix(0, 2)), {}), msfda::Error);
}

TEST(InfoMax, IdenticalRowsGiveZero) {
  ad::Tape tape;
  const Matrix same = Matrix::from_rows({{0.1, 0.6, 0.3}, {0.1, 0.6, 0.3}, {0.1, 0.6, 0.3}});
  EXPECT_NEAR(value(msfda::info_max(tape.constant(same))), 0.0, 1e-15);
  EXPECT_NEAR(value(msfda::info_max(tape.constant(Matrix(4, 5, 0.2)))), 0.0, 1e-15);
}

TEST(InfoMax, TwoOneHotRowsGiveMinusLogTwo) {
  ad::Tape tape;
  EXPECT_NEAR(value(msfda::info_max(tape.constant(Matrix::from_rows({{1, 0}, {0, 1}})))), -std::log(2.0), 1e-12);
}

TEST(InfoMax, NeverPositive) {
  msfda::Rng rng = msfda::make_rng(1, "im");
  std::uniform_real_distribution<double> u(-6, 6);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix l(1 + trial % 9, 2 + trial % 4);
    for (double& v : l.values()) v = u(rng);
    ad::Tape tape;
    EXPECT_LE(value(msfda::info_max(tape.constant(msfda::softmax_rows(l)))), 1e-9);
  }
}

TEST(Adversarial, HalfEverywhere) {
  const auto m = logit_model(2);
  const auto d = constant_disc(2, 0.0);
  EXPECT_NEAR(msfda::adversarial(m, d, Matrix(3, 2, 1.0), Matrix(2, 2, -1.0)), -2.0 * std::log(2.0), 1e-15);
}

TEST(Adversarial, MaximalDiscriminationApproachesZero) {
  // logit = +/-100 on labeled/unlabeled features, clamped to +/-30
  const auto m = logit_model(1);
  msfda::Discriminator d{msfda::make_affine(Matrix(1, 1, 100.0), Matrix(1, 1, 0.0))};
  const double v = msfda::adversarial(m, d, Matrix(2, 1, 1.0), Matrix(3, 1, -1.0));
  EXPECT_GE(v, -1e-12);
  EXPECT_LE(v, 0.0);
}

TEST(Adversarial, EmptyUnlabeledIsZero) {
  const auto m = logit_model(2);
  EXPECT_EQ(msfda::adversarial(m, constant_disc(2, 0.7), Matrix(3, 2, 1.0), Matrix(0, 2)), 0.0);
}

TEST(Adversarial, BoundedBelowByClamp) {
  const auto m = logit_model(1);
  msfda::Discriminator d{msfda::make_affine(Matrix(1, 1, -1000.0), Matrix(1, 1, 0.0))};
  const double v = msfda::adversarial(m, d, Matrix(2, 1, 1.0), Matrix(2, 1, -1.0));
  EXPECT_GE(v, -62.0);
  EXPECT_LT(v, -59.0);
}

TEST(JointLoss, ZeroWeightsReduceToCrossEntropy) {
  const auto m = logit_model(3);
  const auto d = constant_disc(3, 0.3);
  msfda::AdaptationBatch b{Matrix::from_rows({{1, 2, 0}, {0, -1, 3}}), {1, 2}, Matrix::from_rows({{2, 2, 2}})};
  const auto parts = msfda::joint_feature_loss(m, d, b, {0.0, 0.0});
  EXPECT_EQ(parts.joint, msfda::cross_entropy(m, b.labeled_inputs, b.pseudo_labels));
}

TEST(JointLoss, PerfectIdenticalPredictionsVanish) {
  // Large logits make predictions effectively one-hot at the pseudo-label.
  const auto m = logit_model(2);
  msfda::AdaptationBatch b{Matrix::from_rows({{80, 0}, {80, 0}}), {0, 0}, Matrix(0, 2)};
  const auto parts = msfda::joint_feature_loss(m, constant_disc(2, 0.0), b, {1.0, 0.0});
  EXPECT_NEAR(parts.joint, 0.0, 1e-12);
}

TEST(JointLoss, SumOfIndependentlyComputedTerms) {
  const auto m = logit_model(2);
  const auto d = constant_disc(2, 0.5);
  msfda::AdaptationBatch b{Matrix::from_rows({{std::log(3.0), 0.0}, {0.0, 0.0}}), {0, 1}, Matrix::from_rows({{1, 1}})};
  // predictions: (3/4, 1/4) and (1/2, 1/2)
  const double ce = -(std::log(0.75) + std::log(0.5)) / 2.0;
  auto h = [](double p, double q) { return -(p * std::log(p) + q * std::log(q)); };
  const double im = (h(0.75, 0.25) + h(0.5, 0.5)) / 2.0 - h(0.625, 0.375);
  const double s = 1.0 / (1.0 + std::exp(-0.5));
  const double adv = std::log(s) + std::log(1.0 - s);
  const auto parts = msfda::joint_feature_loss(m, d, b, {0.7, 2.0});
  EXPECT_NEAR(parts.cross_entropy, ce, 1e-14);
  EXPECT_NEAR(parts.info_max, im, 1e-14);
  EXPECT_NEAR(parts.adversarial, adv, 1e-14);
  EXPECT_NEAR(parts.joint, ce + 0.7 * im + 2.0 * adv, 1e-14);
}

TEST(Discriminator, OutputStrictlyInsideUnitInterval) {
  msfda::Discriminator d{msfda::make_affine(Matrix(1, 1, 1e6), Matrix(1, 1, 0.0))};
  const Matrix p = d.probability(Matrix::from_rows({{1}, {-1}}));
  EXPECT_LT(p(0, 0), 1.0);
  EXPECT_GT(p(1, 0), 0.0);
}

TEST(Discriminator, AscentStepDoesNotDecreaseLoss) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    msfda::Rng rng = msfda::make_rng(seed, "disc");
    auto disc = msfda::make_discriminator(4, 8, rng);
    std::normal_distribution<double> n(0, 1);
    Matrix fl(16, 4), fu(16, 4);
    for (double& v : fl.values()) v = n(rng) + 0.5;
    for (double& v : fu.values()) v = n(rng) - 0.5;
    const msfda::LossBuilder loss = [&](ad::Tape& tape, std::span<const msfda::MlpVars> p) {
      return msfda::adversarial(p[0], tape.constant(fl), tape.constant(fu));
    };
    const double before = msfda::evaluate_loss(loss, std::span(&disc.net, 1));
    const auto g = msfda::grad(loss, std::span(&disc.net, 1));
    msfda::OptimizerState state({1e-3, 0.9, 0.0}, disc.net);
    msfda::sgd_ascent_step(disc.net, g.gradients[0], state);
    EXPECT_GE(msfda::evaluate_loss(loss, std::span(&disc.net, 1)), before) << "seed " << seed;
  }
}

TEST(LossWeights, NegativeRejected) {
  EXPECT_THROW((msfda::LossWeights{-1.0, 1.0}.validate()), msfda::ValidationError);
  EXPECT_THROW((msfda::LossWeights{1.0, -0.1}.validate()), msfda::ValidationError);
}
