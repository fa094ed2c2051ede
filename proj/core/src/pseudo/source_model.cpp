#include "msfda/pseudo/source_model.hpp"

#include <string>

#include "msfda/error.hpp"

namespace msfda {

void SourceModel::validate() const {
  extractor.validate();
  classifier.validate();
  if (extractor.output_dim() != classifier.input_dim()) {
    throw ShapeError("model '" + domain + "': extractor output " +
                     std::to_string(extractor.output_dim()) + " does not feed classifier input " +
                     std::to_string(classifier.input_dim()));
  }
}

Matrix SourceModel::logits(const Matrix& inputs) const {
  return forward_mlp(classifier, features(inputs));
}

Matrix SourceModel::predict(const Matrix& inputs) const { return softmax_rows(logits(inputs)); }

}  // namespace msfda
