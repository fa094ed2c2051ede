#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "msfda/data/csv.hpp"
#include "msfda/data/pretrain.hpp"
#include "msfda/data/synthetic.hpp"
#include "msfda/error.hpp"

using msfda::Matrix;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "msfda_data_test";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

msfda::DomainSpec spec(const std::string& id, double rotation_deg, std::size_t samples = 200,
                       double label_noise = 0.0) {
  return {id, msfda::circle_mixture(3, 2, 3.0, 0.5), {rotation_deg * std::numbers::pi / 180.0, {}, 0.0},
          label_noise, samples};
}

std::vector<double> class_mean(const msfda::Dataset& d, const std::vector<std::size_t>& labels, std::size_t k) {
  std::vector<double> m(d.dim(), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (labels[i] == k) {
      for (std::size_t j = 0; j < d.dim(); ++j) m[j] += d.features(i, j);
      ++n;
    }
  for (double& v : m) v /= static_cast<double>(n);
  return m;
}

}  // namespace

TEST(Synthetic, SameSeedBitIdentical) {
  const std::vector specs{spec("s1", 10), spec("s2", -10), spec("t", 0)};
  const auto a = msfda::generate_multi_source(specs, 11);
  const auto b = msfda::generate_multi_source(specs, 11);
  ASSERT_EQ(a.sources.size(), 2u);
  EXPECT_EQ(a.sources[0], b.sources[0]);
  EXPECT_EQ(a.sources[1], b.sources[1]);
  EXPECT_EQ(a.target, b.target);
  EXPECT_EQ(a.truth, b.truth);
  EXPECT_FALSE(a.target.labeled());
  EXPECT_NE(a.sources[0].features, msfda::generate_multi_source(specs, 12).sources[0].features);
}

TEST(Synthetic, IdentityTransformMatchesBaseDrawsUnderRotation) {
  // Same id and seed share the base draws; a 90 degree rotation must map
  // each identity-transform point (x, y) to (-y, x).
  const auto base = msfda::generate_domain(spec("d", 0), 5);
  const auto turned = msfda::generate_domain(spec("d", 90), 5);
  ASSERT_EQ(base.labels, turned.labels);
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_NEAR(turned.features(i, 0), -base.features(i, 1), 1e-12);
    EXPECT_NEAR(turned.features(i, 1), base.features(i, 0), 1e-12);
  }
  // identity-transform class means sit near the mixture means
  const auto mix = msfda::circle_mixture(3, 2, 3.0, 0.5);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto m = class_mean(base, *base.labels, k);
    EXPECT_NEAR(m[0], mix.class_means(k, 0), 0.3);
    EXPECT_NEAR(m[1], mix.class_means(k, 1), 0.3);
  }
}

TEST(Synthetic, TargetMeansLieBetweenRotatedSources) {
  const std::vector specs{spec("plus", 15, 600), spec("minus", -15, 600), spec("target", 0, 600)};
  const auto data = msfda::generate_multi_source(specs, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    auto angle = [](const std::vector<double>& m) { return std::atan2(m[1], m[0]); };
    const double plus = angle(class_mean(data.sources[0], *data.sources[0].labels, k));
    const double minus = angle(class_mean(data.sources[1], *data.sources[1].labels, k));
    const double target = angle(class_mean(data.target, data.truth.labels, k));
    // unwrap around the target angle
    auto rel = [&](double a) { return std::remainder(a - target, 2.0 * std::numbers::pi); };
    EXPECT_GT(rel(plus), 0.0) << "class " << k;
    EXPECT_LT(rel(minus), 0.0) << "class " << k;
  }
}

TEST(Synthetic, NoLabelNoiseTruthEqualsGeneratingClass) {
  std::vector<std::size_t> clean;
  const auto d = msfda::generate_domain(spec("x", 0, 90), 8, &clean);
  EXPECT_EQ(*d.labels, clean);
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t c : clean) ++counts[c];
  EXPECT_EQ(counts, (std::vector<std::size_t>{30, 30, 30}));
}

TEST(Synthetic, LabelNoiseFlipsRoughlyTheRate) {
  std::vector<std::size_t> clean;
  const auto d = msfda::generate_domain(spec("x", 0, 3000, 0.2), 8, &clean);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < d.size(); ++i) flips += (*d.labels)[i] != clean[i];
  EXPECT_NEAR(static_cast<double>(flips) / 3000.0, 0.2, 0.03);
}

TEST(Synthetic, DegenerateSpecsRejected) {
  EXPECT_THROW(msfda::generate_domain(spec("x", 0, 0), 1), msfda::ValidationError);
  EXPECT_THROW(msfda::generate_domain(spec("x", 0, 10, 0.5), 1), msfda::ValidationError);
  const std::vector only_target{spec("t", 0)};
  EXPECT_THROW(msfda::generate_multi_source(only_target, 1), msfda::ValidationError);
  const std::vector dup{spec("a", 0), spec("a", 5)};
  EXPECT_THROW(msfda::generate_multi_source(dup, 1), msfda::ValidationError);
}

TEST(Csv, WriteThenLoadRoundTrip) {
  const auto d = msfda::generate_domain(spec("src", 20, 30), 2);
  const fs::path p = scratch("roundtrip.csv");
  msfda::write_csv(p, d);
  EXPECT_EQ(msfda::load_standard_csv(p), d);
}

TEST(Csv, LexicalLabelMapping) {
  const fs::path p = scratch("pets.csv");
  write_text(p, "f0,f1,label\n1,2,dog\n3,4,cat\n5,6,dog\n");
  msfda::CsvSchema schema{{"f0", "f1"}, "label", std::nullopt, std::nullopt};
  const auto d = msfda::load_csv(p, schema);
  EXPECT_EQ(*d.labels, (std::vector<std::size_t>{1, 0, 1}));  // cat -> 1, dog -> 2 externally
  EXPECT_EQ(d.num_classes, 2u);
}

TEST(Csv, HandWrittenFeatures) {
  const fs::path p = scratch("three.csv");
  write_text(p, "f1,f0,domain\n0.5,-1,a\n2,3.25,a\n1e-3,7,a\n");
  msfda::CsvSchema schema{{"f0", "f1"}, std::nullopt, "domain", std::nullopt};
  const auto d = msfda::load_csv(p, schema);
  EXPECT_EQ(d.features, Matrix::from_rows({{-1, 0.5}, {3.25, 2}, {7, 1e-3}}));
  EXPECT_EQ(d.domain, "a");
  EXPECT_FALSE(d.labeled());
}

TEST(Csv, MissingColumnIsSchemaError) {
  const fs::path p = scratch("missing.csv");
  write_text(p, "f0,label\n1,a\n");
  msfda::CsvSchema schema{{"f0", "f1"}, "label", std::nullopt, std::nullopt};
  EXPECT_THROW(msfda::load_csv(p, schema), msfda::SchemaError);
}

TEST(Csv, NonNumericFeatureNamesRow) {
  const fs::path p = scratch("bad.csv");
  write_text(p, "f0,f1\n1,2\n3,oops\n");
  msfda::CsvSchema schema{{"f0", "f1"}, std::nullopt, std::nullopt, std::nullopt};
  try {
    msfda::load_csv(p, schema);
    FAIL() << "expected a parse error";
  } catch (const msfda::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {0.1, -1e-300, 3.141592653589793, 1e22, 0.0}) EXPECT_EQ(std::stod(msfda::format_double(v)), v);
}

TEST(Pretrain, SeparableBlobsReachHighAccuracy) {
  msfda::BaseMixture mix{Matrix::from_rows({{-3, 0}, {3, 0}}), 0.6};
  const msfda::DomainSpec s{"blobs", mix, {}, 0.0, 200};
  const auto d = msfda::generate_domain(s, 4);
  // a linear separator exists: the vertical axis splits the classes
  for (std::size_t i = 0; i < d.size(); ++i) ASSERT_EQ(d.features(i, 0) > 0.0, (*d.labels)[i] == 1);
  const auto model = msfda::pretrain_source(d, {16, 4}, {}, 4);
  EXPECT_GE(msfda::accuracy(model, d.features, *d.labels), 0.99);
  EXPECT_EQ(model.domain, "blobs");
}

TEST(Pretrain, DeterministicUnderSeed) {
  const auto d = msfda::generate_domain(spec("s", 0, 60), 1);
  msfda::PretrainConfig cfg;
  cfg.epochs = 3;
  EXPECT_EQ(msfda::pretrain_source(d, {8, 4}, cfg, 9), msfda::pretrain_source(d, {8, 4}, cfg, 9));
}

TEST(Pretrain, RejectsDegenerateInputs) {
  msfda::Dataset one_class{Matrix(3, 2, 1.0), std::vector<std::size_t>{0, 0, 0}, "x", 1};
  EXPECT_THROW(msfda::pretrain_source(one_class, {}, {}, 1), msfda::ValidationError);
  msfda::Dataset unlabeled{Matrix(3, 2, 1.0), std::nullopt, "x", 2};
  EXPECT_THROW(msfda::pretrain_source(unlabeled, {}, {}, 1), msfda::ValidationError);
}
