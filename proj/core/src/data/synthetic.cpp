#include "msfda/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "msfda/error.hpp"
#include "msfda/numerics/rng.hpp"

namespace msfda {

void DomainSpec::validate() const {
  const auto fail = [this](const std::string& what) {
    throw ValidationError("data", "domain '" + id + "': " + what);
  };
  if (samples == 0) fail("zero samples");
  if (mixture.num_classes() < 2) fail("at least two classes required");
  if (mixture.dim() == 0) fail("zero-dimensional features");
  if (!(mixture.scale >= 0.0)) fail("negative covariance scale");
  if (!(label_noise >= 0.0 && label_noise < 0.5)) fail("label noise must lie in [0, 0.5)");
  if (!(transform.feature_noise >= 0.0)) fail("negative feature noise");
  if (!transform.translation.empty() && transform.translation.size() != mixture.dim())
    fail("translation length differs from feature dimension");
  for (std::size_t a = 0; a < mixture.num_classes(); ++a)
    for (std::size_t b = a + 1; b < mixture.num_classes(); ++b)
      if (squared_distance(mixture.class_means.row(a), mixture.class_means.row(b)) == 0.0)
        fail("class means must be distinct");
}

BaseMixture circle_mixture(std::size_t classes, std::size_t dim, double radius, double scale) {
  if (dim < 2) throw ValidationError("data", "circle mixture needs dim >= 2");
  BaseMixture mixture{Matrix(classes, dim), scale};
  for (std::size_t k = 0; k < classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(classes);
    mixture.class_means(k, 0) = radius * std::cos(angle);
    mixture.class_means(k, 1) = radius * std::sin(angle);
  }
  return mixture;
}

Dataset generate_domain(const DomainSpec& spec, std::uint64_t seed,
                        std::vector<std::size_t>* clean_classes) {
  spec.validate();
  const std::size_t n = spec.samples;
  const std::size_t d = spec.mixture.dim();
  const std::size_t classes = spec.mixture.num_classes();
  Rng rng = make_rng(seed, "domain:" + spec.id);

  std::vector<std::size_t> cls(n);
  for (std::size_t i = 0; i < n; ++i) cls[i] = i % classes;
  std::shuffle(cls.begin(), cls.end(), rng);

  std::normal_distribution<double> normal(0.0, 1.0);
  const double c = std::cos(spec.transform.rotation);
  const double s = std::sin(spec.transform.rotation);
  Dataset out{Matrix(n, d), std::vector<std::size_t>(n), spec.id, classes};
  for (std::size_t i = 0; i < n; ++i) {
    auto x = out.features.row(i);
    for (std::size_t j = 0; j < d; ++j)
      x[j] = spec.mixture.class_means(cls[i], j) + spec.mixture.scale * normal(rng);
    if (d >= 2) {
      const double x0 = x[0], x1 = x[1];
      x[0] = c * x0 - s * x1;
      x[1] = s * x0 + c * x1;
    }
    for (std::size_t j = 0; j < spec.transform.translation.size(); ++j)
      x[j] += spec.transform.translation[j];
    if (spec.transform.feature_noise > 0.0)
      for (double& v : x) v += spec.transform.feature_noise * normal(rng);
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> other(1, classes - 1);
  auto& labels = *out.labels;
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = cls[i];
    if (spec.label_noise > 0.0 && unit(rng) < spec.label_noise)
      labels[i] = (cls[i] + other(rng)) % classes;
  }
  if (clean_classes) *clean_classes = std::move(cls);
  return out;
}

MultiSourceData generate_multi_source(std::span<const DomainSpec> specs, std::uint64_t seed) {
  if (specs.size() < 2) throw ValidationError("data", "need at least one source and one target");
  const std::size_t d = specs.front().mixture.dim();
  const std::size_t classes = specs.front().mixture.num_classes();
  for (std::size_t a = 0; a < specs.size(); ++a) {
    const auto& spec = specs[a];
    for (std::size_t b = 0; b < a; ++b)
      if (specs[b].id == spec.id) throw ValidationError("data", "duplicate domain id '" + spec.id + "'");
    if (spec.mixture.dim() != d || spec.mixture.num_classes() != classes)
      throw ValidationError("data", "domain '" + spec.id + "' disagrees on feature dim or class count");
  }
  MultiSourceData out;
  for (std::size_t j = 0; j + 1 < specs.size(); ++j) out.sources.push_back(generate_domain(specs[j], seed));
  Dataset target = generate_domain(specs.back(), seed);
  out.truth.labels = std::move(*target.labels);
  target.labels.reset();
  out.target = std::move(target);
  return out;
}

}  // namespace msfda
