#include <benchmark/benchmark.h>

#include <numbers>

#include "msfda/data/pretrain.hpp"
#include "msfda/data/synthetic.hpp"
#include "msfda/engine/engine.hpp"
#include "msfda/losses/losses.hpp"
#include "msfda/numerics/gradient.hpp"
#include "msfda/theory/theory.hpp"

using namespace msfda;

namespace {

struct Suite {
  std::vector<SourceModel> models;
  Dataset target;
};

const Suite& suite() {
  static const Suite s = [] {
    const auto mix = circle_mixture(3, 2, 3.0, 0.8);
    const double deg = std::numbers::pi / 180.0;
    std::vector<DomainSpec> specs{{"s1", mix, {40 * deg, {}, 0}, 0, 300},
                                  {"s2", mix, {55 * deg, {}, 0}, 0, 300},
                                  {"s3", mix, {180 * deg, {}, 0}, 0, 300},
                                  {"t", mix, {}, 0, 300}};
    auto data = generate_multi_source(specs, 1);
    Suite out;
    for (const auto& d : data.sources) out.models.push_back(pretrain_source(d, {}, {}, 1));
    out.target = data.target;
    return out;
  }();
  return s;
}

}  // namespace

static void BM_JointLossGradient(benchmark::State& state) {
  const auto& s = suite();
  const std::size_t b = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(2, "bench");
  const Discriminator disc = make_discriminator(s.models[0].feature_dim(), 32, rng);
  std::vector<std::size_t> idx(b), labels(b, 0);
  for (std::size_t i = 0; i < b; ++i) idx[i] = i;
  AdaptationBatch batch{s.target.features.gather_rows(idx), labels, s.target.features.gather_rows(idx)};
  const LossBuilder loss = [&](ad::Tape& tape, std::span<const MlpVars> p) {
    return joint_feature_loss(p[0], bind(tape, s.models[0].classifier, false), p[1], batch, LossWeights{});
  };
  const std::vector<MlpParams> params{s.models[0].extractor, disc.net};
  for (auto _ : state) benchmark::DoNotOptimize(grad(loss, params));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b));
}
BENCHMARK(BM_JointLossGradient)->Arg(32)->Arg(128);

static void BM_InitialPseudoLabels(benchmark::State& state) {
  const auto& s = suite();
  const AdaptationConfig c;
  const DomainWeights w = domain_weights(s.models, s.target);
  for (auto _ : state) benchmark::DoNotOptimize(initial_pseudo_labels(s.models, s.target, w, c));
}
BENCHMARK(BM_InitialPseudoLabels);

static void BM_AdaptIteration(benchmark::State& state) {
  const auto& s = suite();
  AdaptationConfig c;
  c.iterations = 1;
  c.workers = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(adapt(s.models, s.target, c));
}
BENCHMARK(BM_AdaptIteration)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_BiasBoundCheck(benchmark::State& state) {
  Rng rng = make_rng(3, "bench");
  const auto inst = theory::random_instance(rng, static_cast<std::size_t>(state.range(0)), 3, 2, 0.3);
  const Matrix target = theory::product_joint(inst.target_marginal, inst.target_conditional);
  const Matrix labeled = theory::product_joint(inst.target_marginal, inst.source_conditionals[0]);
  for (auto _ : state) benchmark::DoNotOptimize(theory::bias_bound_check(labeled, target));
}
BENCHMARK(BM_BiasBoundCheck)->Arg(6)->Arg(8)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
