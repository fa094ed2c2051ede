#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "msfda/data/pretrain.hpp"
#include "msfda/data/synthetic.hpp"
#include "msfda/engine/engine.hpp"
#include "msfda/error.hpp"

using msfda::Matrix;

namespace {

struct Fixture {
  std::vector<msfda::SourceModel> models;
  msfda::Dataset target;
  msfda::HiddenTruth truth;
};

Fixture small_suite(std::uint64_t seed, std::vector<double> rotations_deg) {
  const auto mix = msfda::circle_mixture(3, 2, 3.0, 0.8);
  std::vector<msfda::DomainSpec> specs;
  for (std::size_t j = 0; j < rotations_deg.size(); ++j)
    specs.push_back({"s" + std::to_string(j + 1), mix, {rotations_deg[j] * std::numbers::pi / 180.0, {}, 0.0}, 0.0, 90});
  specs.push_back({"t", mix, {}, 0.0, 90});
  auto data = msfda::generate_multi_source(specs, seed);
  Fixture f;
  msfda::PretrainConfig pc;
  pc.epochs = 10;
  for (const auto& s : data.sources) f.models.push_back(msfda::pretrain_source(s, {16, 4}, pc, seed));
  f.target = data.target;
  f.truth = data.truth;
  return f;
}

msfda::AdaptationConfig quick(std::size_t iterations) {
  msfda::AdaptationConfig c;
  c.iterations = iterations;
  c.inner_epochs = 2;
  c.batch_size = 16;
  c.discriminator_hidden = 8;
  c.seed = 5;
  return c;
}

msfda::SourceModel affine_model(Matrix classifier_weight) {
  const std::size_t d = classifier_weight.rows(), k = classifier_weight.cols();
  return {msfda::make_affine(Matrix::identity(d), Matrix(1, d, 0.0)),
          msfda::make_affine(std::move(classifier_weight), Matrix(1, k, 0.0)), "a"};
}

}  // namespace

TEST(Adapt, ZeroIterationsIsNoOp) {
  const auto f = small_suite(1, {20, -20});
  const auto r = msfda::adapt(f.models, f.target, quick(0), &f.truth);
  EXPECT_EQ(r.models, f.models);
  EXPECT_TRUE(r.metrics.empty());
  EXPECT_EQ(r.final_partition.size(), f.target.size());
}

TEST(Adapt, ClassifierFrozenAndCountsConsistent) {
  const auto f = small_suite(2, {30, 50, 180});
  const auto r = msfda::adapt(f.models, f.target, quick(3), &f.truth);
  ASSERT_EQ(r.metrics.size(), 3u);
  for (std::size_t j = 0; j < f.models.size(); ++j) {
    EXPECT_EQ(r.models[j].classifier, f.models[j].classifier);
    EXPECT_NE(r.models[j].extractor, f.models[j].extractor);
  }
  for (const auto& m : r.metrics) EXPECT_EQ(m.labeled + m.unlabeled, f.target.size());
}

TEST(Adapt, DeterministicAcrossWorkerCounts) {
  const auto f = small_suite(3, {30, 50, 180});
  auto c = quick(3);
  const auto a = msfda::adapt(f.models, f.target, c, &f.truth);
  c.workers = 3;
  const auto b = msfda::adapt(f.models, f.target, c, &f.truth);
  EXPECT_EQ(a.models, b.models);
  for (std::size_t i = 0; i < a.metrics.size(); ++i)
    EXPECT_EQ(msfda::format_metrics(a.metrics[i]), msfda::format_metrics(b.metrics[i]));
}

TEST(Adapt, TruthDoesNotInfluenceThresholdRun) {
  const auto f = small_suite(4, {30, 50});
  const auto with = msfda::adapt(f.models, f.target, quick(2), &f.truth);
  const auto without = msfda::adapt(f.models, f.target, quick(2), nullptr);
  EXPECT_EQ(with.models, without.models);
  EXPECT_TRUE(std::isnan(without.metrics[0].ensemble_accuracy));
}

TEST(Adapt, SingleMatchingSourceDoesNotLoseAccuracy) {
  msfda::BaseMixture mix{Matrix::from_rows({{-3, 0}, {3, 0}}), 0.7};
  const std::vector<msfda::DomainSpec> specs{{"s", mix, {}, 0.0, 200}, {"t", mix, {}, 0.0, 200}};
  const auto data = msfda::generate_multi_source(specs, 6);
  const auto model = msfda::pretrain_source(data.sources[0], {16, 4}, {}, 6);
  const double before = msfda::accuracy(model, data.target.features, data.truth.labels);
  const std::vector models{model};
  const auto r = msfda::adapt(models, data.target, quick(3), &data.truth);
  EXPECT_GE(msfda::accuracy(r.models[0], data.target.features, data.truth.labels), before);
}

TEST(Adapt, BothAblationsReduceToCrossEntropyPlusInfoMax) {
  const auto f = small_suite(7, {30, -30});
  auto c = quick(1);
  c.ablate_alignment = c.ablate_denoise = true;
  const auto r = msfda::adapt(f.models, f.target, c, &f.truth);

  // Independent recomputation of iteration 1: q uniform makes the fused
  // score (1/K) sum_j w_j h^j.
  const std::size_t n = f.target.size(), k = 3, m = f.models.size();
  std::vector<Matrix> h;
  std::vector<double> ent(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    h.push_back(f.models[j].predict(f.target.features));
    for (double v : h[j].values()) ent[j] -= v > 0 ? v * std::log(v) : 0.0;
    ent[j] /= static_cast<double>(n);
  }
  double z = 0.0;
  std::vector<double> w(m);
  for (std::size_t j = 0; j < m; ++j) z += w[j] = std::exp(-ent[j]);
  for (double& v : w) v /= z;
  std::vector<std::size_t> label(n);
  std::vector<double> score(n);
  double mean_score = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> fused(k, 0.0);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c2 = 0; c2 < k; ++c2) fused[c2] += w[j] * h[j](i, c2) / static_cast<double>(k);
    label[i] = msfda::argmax(fused);
    score[i] = fused[label[i]];
    mean_score += score[i] / static_cast<double>(n);
  }
  const double alpha = c.schedule.beta * c.schedule.gamma * mean_score;
  std::vector<std::size_t> dl;
  for (std::size_t i = 0; i < n; ++i)
    if (score[i] > alpha) dl.push_back(i);
  ASSERT_EQ(r.metrics[0].labeled, dl.size());
  EXPECT_NEAR(r.metrics[0].alpha, alpha, 1e-15);

  for (std::size_t j = 0; j < m; ++j) {
    double ce = 0.0, mean_h = 0.0;
    std::vector<double> pbar(k, 0.0);
    for (std::size_t i : dl) {
      ce -= std::log(h[j](i, label[i]));
      for (std::size_t c2 = 0; c2 < k; ++c2) {
        const double p = h[j](i, c2);
        mean_h -= p * std::log(p);
        pbar[c2] += p;
      }
    }
    const double nl = static_cast<double>(dl.size());
    double im = mean_h / nl;
    for (double p : pbar) im += (p / nl) * std::log(p / nl);
    const auto& got = r.metrics[0].losses[j].initial;
    EXPECT_NEAR(got.cross_entropy, ce / nl, 1e-12);
    EXPECT_NEAR(got.info_max, im, 1e-12);
    EXPECT_NEAR(got.joint, ce / nl + im, 1e-12);
  }
}

TEST(Adapt, EmptyLabeledSubsetSkipsUpdates) {
  const auto f = small_suite(8, {30, 50});
  auto c = quick(2);
  c.schedule = {1e6, 1.0};  // alpha above every score
  const auto r = msfda::adapt(f.models, f.target, c, &f.truth);
  for (const auto& m : r.metrics) {
    EXPECT_TRUE(m.skipped_updates);
    EXPECT_EQ(m.labeled, 0u);
  }
  EXPECT_EQ(r.models, f.models);
}

TEST(Adapt, OracleNeedsTruth) {
  const auto f = small_suite(9, {30});
  auto c = quick(1);
  c.selection = msfda::SelectionMode::oracle;
  EXPECT_THROW(msfda::adapt(f.models, f.target, c, nullptr), msfda::ValidationError);
}

TEST(Adapt, RejectsMismatchedClassCounts) {
  const auto a = affine_model(Matrix(2, 2, 0.1));
  const auto b = affine_model(Matrix(2, 3, 0.1));
  const std::vector models{a, b};
  msfda::Dataset t{Matrix(4, 2, 0.5), std::nullopt, "t", 2};
  EXPECT_THROW(msfda::adapt(models, t, quick(1)), msfda::ValidationError);
}

TEST(Adapt, SelectedSubsetMoreAccurateThanAllPseudoLabels) {
  // Two sources agree with the target labeling, the third is rotated away:
  // majority pseudo-labels are correct by construction.
  const auto f = small_suite(10, {10, -10, 180});
  const auto c = quick(1);
  const auto w = msfda::domain_weights(f.models, f.target);
  const auto fused = msfda::initial_pseudo_labels(f.models, f.target, w, c);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < fused.labels.size(); ++i) correct += fused.labels[i] == f.truth.labels[i];
  const double overall = static_cast<double>(correct) / static_cast<double>(fused.labels.size());
  const auto r = msfda::adapt(f.models, f.target, c, &f.truth);
  EXPECT_GE(r.metrics[0].pseudo_label_accuracy, overall);
}

TEST(EnsemblePredict, HandArithmetic) {
  // identity extractor, classifier picks logits so predictions are fixed
  const auto m1 = affine_model(Matrix::identity(2)), m2 = affine_model(Matrix::identity(2));
  const std::vector models{m1, m2};
  const double x[] = {0.0, 0.0};
  const auto p = msfda::ensemble_predict(models, msfda::DomainWeights{{0.75, 0.25}}, x);
  EXPECT_EQ(p.label, 0u);  // exact tie at 0.5/0.5 goes to the smaller class
  EXPECT_EQ(p.probabilities, (std::vector<double>{0.5, 0.5}));

  // zero classifier weights, log-probability biases: h1 = [0.4, 0.6], h2 = [0.9, 0.1]
  msfda::SourceModel s1 = m1, s2 = m1;
  s1.classifier = msfda::make_affine(Matrix(2, 2, 0.0), Matrix::from_rows({{std::log(0.4), std::log(0.6)}}));
  s2.classifier = msfda::make_affine(Matrix(2, 2, 0.0), Matrix::from_rows({{std::log(0.9), std::log(0.1)}}));
  const std::vector pair{s1, s2};
  const auto q = msfda::ensemble_predict(pair, msfda::DomainWeights{{0.75, 0.25}}, x);
  EXPECT_NEAR(q.probabilities[0], 0.525, 1e-15);
  EXPECT_NEAR(q.probabilities[1], 0.475, 1e-15);
  EXPECT_EQ(q.label, 0u);  // class 1 in 1-based terms
}

TEST(EnsemblePredict, IdenticalModelsMatchSingle) {
  const auto f = small_suite(11, {20});
  const std::vector three(3, f.models[0]);
  const auto single = msfda::ensemble_predict(std::span(f.models.data(), 1), msfda::DomainWeights{{1.0}},
                                              f.target.features);
  EXPECT_EQ(msfda::ensemble_predict(three, msfda::DomainWeights{{0.2, 0.5, 0.3}}, f.target.features), single);
}

TEST(OraclePartition, CountsCorrectLabels) {
  msfda::FusedLabels fused{{0, 1, 1, 0, 2}, {0.1, 0.2, 0.3, 0.4, 0.5}};
  const auto p = msfda::oracle_partition(msfda::HiddenTruth{{0, 1, 0, 0, 1}}, fused);
  EXPECT_EQ(p.labeled, (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_TRUE(std::isnan(p.alpha));
  EXPECT_TRUE(msfda::oracle_partition(msfda::HiddenTruth{fused.labels}, fused).unlabeled.empty());
  EXPECT_TRUE(msfda::oracle_partition(msfda::HiddenTruth{{1, 0, 0, 1, 0}}, fused).labeled.empty());
}

TEST(Evaluate, DirectFractions) {
  const auto m = affine_model(Matrix::identity(2));
  const std::vector models{m};
  const msfda::DomainWeights w{{1.0}};
  // features are logits: row i predicts argmax of its row
  msfda::Dataset d{Matrix(10, 2, 0.0), std::nullopt, "t", 2};
  std::vector<std::size_t> truth(10);
  for (std::size_t i = 0; i < 10; ++i) {
    d.features(i, i % 2) = 1.0;
    truth[i] = i % 2;
  }
  EXPECT_EQ(msfda::evaluate(models, w, d, {truth}), 1.0);
  std::vector<std::size_t> flipped(10);
  for (std::size_t i = 0; i < 10; ++i) flipped[i] = 1 - truth[i];
  EXPECT_EQ(msfda::evaluate(models, w, d, {flipped}), 0.0);
  for (std::size_t i = 0; i < 3; ++i) flipped[i] = truth[i];
  for (std::size_t i = 3; i < 10; ++i) flipped[i] = i < 7 ? truth[i] : 1 - truth[i];
  EXPECT_DOUBLE_EQ(msfda::evaluate(models, w, d, {flipped}), 0.7);
}

TEST(PartitionCsv, RoundTrip) {
  msfda::FusedLabels fused{{0, 2, 1}, {0.9, 0.25, 0.5}};
  const auto p = msfda::partition(fused, 0.4);
  std::stringstream s;
  msfda::write_partition_csv(s, p);
  const auto back = msfda::read_partition_csv(s);
  EXPECT_EQ(back.labeled, p.labeled);
  EXPECT_EQ(back.unlabeled, p.unlabeled);
  EXPECT_EQ(back.pseudo_labels, p.pseudo_labels);
  EXPECT_EQ(back.scores, p.scores);
  EXPECT_EQ(back.alpha, p.alpha);
}

TEST(SelectionMode, StringRoundTrip) {
  for (auto mode : {msfda::SelectionMode::threshold, msfda::SelectionMode::oracle, msfda::SelectionMode::unselective})
    EXPECT_EQ(msfda::selection_mode_from_string(msfda::to_string(mode)), mode);
  EXPECT_THROW(msfda::selection_mode_from_string("greedy"), msfda::ValidationError);
}
