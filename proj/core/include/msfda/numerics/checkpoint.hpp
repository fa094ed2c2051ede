#pragma once

#include <iosfwd>

#include "msfda/numerics/mlp.hpp"

namespace msfda {

// Record layout:
//   mlp <layer count>\n
//   dims <d0> <d1> ... <dL>\n
//   act <tag1> ... <tagL>\n
// followed by, per layer, the weight (row-major) then the bias as
// little-endian IEEE-754 binary64 values.
void write_mlp(std::ostream& out, const MlpParams& params);
MlpParams read_mlp(std::istream& in);

}  // namespace msfda
