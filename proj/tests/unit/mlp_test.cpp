#include <gtest/gtest.h>

#include <sstream>

#include "msfda/error.hpp"
#include "msfda/numerics/checkpoint.hpp"
#include "msfda/numerics/mlp.hpp"
#include "msfda/numerics/optimizer.hpp"

using msfda::Matrix;
using msfda::MlpParams;

namespace {

MlpParams scalar_params(double w) { return msfda::make_affine(Matrix(1, 1, w), Matrix(1, 1, 0.0)); }

MlpParams scalar_grads(double g) { return msfda::make_affine(Matrix(1, 1, g), Matrix(1, 1, 0.0)); }

}  // namespace

TEST(ForwardMlp, IdentityLayerReturnsInput) {
  const MlpParams p = msfda::make_affine(Matrix::identity(3), Matrix(1, 3, 0.0));
  const Matrix x = Matrix::from_rows({{1, -2, 3}, {0.5, 0, -7}});
  EXPECT_EQ(msfda::forward_mlp(p, x), x);
}

TEST(ForwardMlp, ZeroWeightsReturnBias) {
  const MlpParams p = msfda::make_affine(Matrix(2, 3, 0.0), Matrix::from_rows({{1, 2, 3}}));
  EXPECT_EQ(msfda::forward_mlp(p, Matrix::from_rows({{4, 5}, {-1, 9}})), Matrix::from_rows({{1, 2, 3}, {1, 2, 3}}));
}

TEST(ForwardMlp, TwoLayerHandEvaluation) {
  MlpParams p;
  p.layers.push_back({Matrix::from_rows({{1, -1}, {2, 1}}), Matrix::from_rows({{0.5, -4}}), msfda::Activation::relu});
  p.layers.push_back({Matrix::from_rows({{3}, {-2}}), Matrix::from_rows({{1}}), msfda::Activation::linear});
  // x = (1, 2): hidden pre = (1 + 4 + 0.5, -1 + 2 - 4) = (5.5, -3) -> relu (5.5, 0)
  // out = 5.5 * 3 + 0 * -2 + 1 = 17.5
  EXPECT_EQ(msfda::forward_mlp(p, Matrix::from_rows({{1, 2}})), Matrix::from_rows({{17.5}}));
}

TEST(ForwardMlp, DimensionMismatchThrows) {
  const MlpParams p = msfda::make_affine(Matrix::identity(3), Matrix(1, 3, 0.0));
  EXPECT_THROW(msfda::forward_mlp(p, Matrix(1, 2)), msfda::ShapeError);
}

TEST(ForwardMlp, Deterministic) {
  msfda::Rng rng = msfda::make_rng(3, "mlp");
  const std::size_t dims[] = {4, 8, 3};
  const MlpParams p = msfda::make_mlp(dims, rng);
  Matrix x(5, 4, 0.3);
  EXPECT_EQ(msfda::forward_mlp(p, x), msfda::forward_mlp(p, x));
  EXPECT_EQ(p.parameter_count(), 4u * 8 + 8 + 8 * 3 + 3);
}

TEST(Mlp, ValidateRejectsNonComposingLayers) {
  MlpParams p;
  p.layers.push_back({Matrix(2, 3), Matrix(1, 3), msfda::Activation::relu});
  p.layers.push_back({Matrix(4, 1), Matrix(1, 1), msfda::Activation::linear});
  EXPECT_THROW(p.validate(), msfda::ShapeError);
}

TEST(Sgd, PlainDescent) {
  MlpParams w = scalar_params(1.0);
  msfda::OptimizerState s({0.1, 0.0, 0.0}, w);
  msfda::sgd_step(w, scalar_grads(2.0), s);
  EXPECT_NEAR(w.layers[0].weight(0, 0), 0.8, 1e-15);
}

TEST(Sgd, WeightDecayTerm) {
  MlpParams w = scalar_params(2.0);
  msfda::OptimizerState s({0.1, 0.0, 0.5}, w);
  msfda::sgd_step(w, scalar_grads(0.0), s);
  EXPECT_NEAR(w.layers[0].weight(0, 0), 1.9, 1e-15);
}

TEST(Sgd, MomentumUnrolling) {
  MlpParams w = scalar_params(0.0);
  msfda::OptimizerState s({1.0, 0.9, 0.0}, w);
  msfda::sgd_step(w, scalar_grads(1.0), s);
  EXPECT_NEAR(w.layers[0].weight(0, 0), -1.0, 1e-15);
  msfda::sgd_step(w, scalar_grads(1.0), s);
  EXPECT_NEAR(w.layers[0].weight(0, 0), -2.9, 1e-15);
}

TEST(Sgd, AscentStepNegatesGradient) {
  MlpParams w = scalar_params(1.0);
  msfda::OptimizerState s({0.1, 0.0, 0.0}, w);
  msfda::sgd_ascent_step(w, scalar_grads(2.0), s);
  EXPECT_NEAR(w.layers[0].weight(0, 0), 1.2, 1e-15);
}

TEST(Sgd, MonotoneOnConvexQuadratic) {
  // f(w) = 0.5 * sum a_i w_i^2 with L = max a_i = 4; lr 0.4 < 2/L
  const double a[] = {0.5, 1.0, 4.0};
  MlpParams w = msfda::make_affine(Matrix::from_rows({{3.0, -2.0, 1.5}}), Matrix(1, 3, 0.0));
  msfda::OptimizerState s({0.4, 0.0, 0.0}, w);
  auto f = [&] {
    double v = 0.0;
    for (int i = 0; i < 3; ++i) v += 0.5 * a[i] * w.layers[0].weight(0, i) * w.layers[0].weight(0, i);
    return v;
  };
  double prev = f();
  for (int step = 0; step < 50; ++step) {
    MlpParams g = msfda::zeros_like(w);
    for (int i = 0; i < 3; ++i) g.layers[0].weight(0, i) = a[i] * w.layers[0].weight(0, i);
    msfda::sgd_step(w, g, s);
    const double cur = f();
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(SgdConfig, ValidateRanges) {
  EXPECT_THROW((msfda::SgdConfig{0.0, 0.9, 0.0}.validate()), msfda::ValidationError);
  EXPECT_THROW((msfda::SgdConfig{0.1, 1.0, 0.0}.validate()), msfda::ValidationError);
  EXPECT_THROW((msfda::SgdConfig{0.1, 0.5, -1.0}.validate()), msfda::ValidationError);
  EXPECT_NO_THROW((msfda::SgdConfig{}.validate()));
}

TEST(Checkpoint, RoundTripIsBitExact) {
  msfda::Rng rng = msfda::make_rng(4, "ckpt");
  const std::size_t dims[] = {2, 7, 5};
  const MlpParams p = msfda::make_mlp(dims, rng);
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  msfda::write_mlp(buf, p);
  EXPECT_EQ(msfda::read_mlp(buf), p);
}

TEST(Checkpoint, HeaderAndLittleEndianLayout) {
  const MlpParams p = msfda::make_affine(Matrix(1, 1, 1.0), Matrix(1, 1, -2.0));
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  msfda::write_mlp(buf, p);
  const std::string bytes = buf.str();
  const std::string header = "mlp 1\ndims 1 1\nact linear\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  // 1.0 = 0x3FF0000000000000, -2.0 = 0xC000000000000000, little-endian
  const std::string payload = bytes.substr(header.size());
  ASSERT_EQ(payload.size(), 16u);
  EXPECT_EQ(static_cast<unsigned char>(payload[7]), 0x3F);
  EXPECT_EQ(static_cast<unsigned char>(payload[6]), 0xF0);
  EXPECT_EQ(static_cast<unsigned char>(payload[15]), 0xC0);
  EXPECT_EQ(static_cast<unsigned char>(payload[0]), 0x00);
}

TEST(Checkpoint, TruncatedInputThrows) {
  const MlpParams p = msfda::make_affine(Matrix(2, 2, 1.0), Matrix(1, 2, 0.0));
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  msfda::write_mlp(buf, p);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream cut(bytes);
  EXPECT_THROW(msfda::read_mlp(cut), msfda::Error);
}
