#include "msfda/data/dataset.hpp"

#include <string>

#include "msfda/error.hpp"

namespace msfda {

void Dataset::validate() const {
  if (features.rows() == 0) throw ValidationError("data", "dataset '" + domain + "' is empty");
  if (!features.all_finite())
    throw ValidationError("data", "dataset '" + domain + "' has non-finite features");
  if (labels) {
    if (labels->size() != features.rows())
      throw ValidationError("data", "dataset '" + domain + "' has one label per row missing");
    for (std::size_t y : *labels)
      if (y >= num_classes)
        throw ValidationError("data", "dataset '" + domain + "' label " + std::to_string(y + 1) +
                                          " outside 1.." + std::to_string(num_classes));
  }
}

}  // namespace msfda
