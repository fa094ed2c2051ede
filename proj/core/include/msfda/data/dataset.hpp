#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "msfda/numerics/matrix.hpp"

namespace msfda {

/// Features plus optional labels. Class labels are zero-based in memory;
/// external files use 1..K.
struct Dataset {
  Matrix features;
  std::optional<std::vector<std::size_t>> labels;
  std::string domain;
  std::size_t num_classes = 0;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  bool labeled() const { return labels.has_value(); }

  /// Throws ValidationError on empty data or out-of-range labels.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// True target labels. Kept apart from the target Dataset so the adaptation
/// path only ever sees unlabeled features; evaluation and the oracle
/// partition take it explicitly.
struct HiddenTruth {
  std::vector<std::size_t> labels;

  friend bool operator==(const HiddenTruth&, const HiddenTruth&) = default;
};

}  // namespace msfda
