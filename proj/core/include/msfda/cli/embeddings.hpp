#pragma once

#include <span>
#include <string>

#include "msfda/data/dataset.hpp"
#include "msfda/pseudo/pseudo_label.hpp"
#include "msfda/pseudo/source_model.hpp"

namespace msfda::cli {

struct Projection {
  Matrix coordinates;  // n x 2
  Matrix components;   // feature_dim x 2; sign: first nonzero loading positive
};

/// Projects centred rows onto the two leading principal components. Throws
/// ValidationError with fewer than two rows.
Projection principal_components_2d(const Matrix& features);

/// CSV with columns index,model,pc1,pc2,subset,pseudo_label,true_label (the
/// last column is empty without truth).
std::string export_embeddings(std::span<const SourceModel> models, const Dataset& dataset,
                              const Partition& partition, const HiddenTruth* truth = nullptr);

}  // namespace msfda::cli
