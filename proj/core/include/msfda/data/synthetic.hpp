#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msfda/data/dataset.hpp"

namespace msfda {

/// Class-conditional isotropic Gaussians shared by every domain.
struct BaseMixture {
  Matrix class_means;  // K x d
  double scale = 1.0;  // per-coordinate standard deviation

  std::size_t num_classes() const { return class_means.rows(); }
  std::size_t dim() const { return class_means.cols(); }
};

/// Rigid motion applied to base draws: rotation in the plane of the first
/// two coordinates, then translation, then extra isotropic noise.
struct DomainTransform {
  double rotation = 0.0;  // radians
  std::vector<double> translation;  // empty means zero
  double feature_noise = 0.0;
};

struct DomainSpec {
  std::string id;
  BaseMixture mixture;
  DomainTransform transform;
  double label_noise = 0.0;  // in [0, 0.5)
  std::size_t samples = 0;

  void validate() const;
};

struct MultiSourceData {
  std::vector<Dataset> sources;
  Dataset target;  // unlabeled
  HiddenTruth truth;
};

/// K class means evenly spaced on a circle of the given radius in the first
/// two coordinates; remaining coordinates are zero.
BaseMixture circle_mixture(std::size_t classes, std::size_t dim, double radius, double scale);

/// Draws one domain. Classes are balanced (round-robin) and then shuffled.
/// Returns the dataset together with its clean (pre-noise) class indices.
Dataset generate_domain(const DomainSpec& spec, std::uint64_t seed,
                        std::vector<std::size_t>* clean_classes = nullptr);

/// The first `specs.size() - 1` entries are sources, the last is the target.
MultiSourceData generate_multi_source(std::span<const DomainSpec> specs, std::uint64_t seed);

}  // namespace msfda
