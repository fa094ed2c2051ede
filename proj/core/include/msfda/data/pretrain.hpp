#pragma once

#include <cstdint>

#include "msfda/data/dataset.hpp"
#include "msfda/numerics/optimizer.hpp"
#include "msfda/pseudo/source_model.hpp"

namespace msfda {

struct Architecture {
  std::size_t hidden = 64;
  std::size_t feature_dim = 16;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct PretrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  SgdConfig optimizer{1e-2, 0.9, 1e-3};

  void validate() const;

  friend bool operator==(const PretrainConfig&, const PretrainConfig&) = default;
};

/// Trains extractor and classifier jointly by cross-entropy on a labeled
/// source dataset. Deterministic under `seed`.
SourceModel pretrain_source(const Dataset& dataset, const Architecture& arch,
                            const PretrainConfig& config, std::uint64_t seed);

/// Fraction of rows whose argmax prediction equals `labels`.
double accuracy(const SourceModel& model, const Matrix& inputs, std::span<const std::size_t> labels);

}  // namespace msfda
