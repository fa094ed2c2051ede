#include "msfda/numerics/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "msfda/error.hpp"

namespace msfda {

namespace {

void write_f64(std::ostream& out, double value) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_f64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParseError("numerics", "truncated checkpoint");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::istringstream header_line(std::istream& in, const std::string& keyword) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("numerics", "checkpoint missing '" + keyword + "' line");
  std::istringstream fields(line);
  std::string word;
  fields >> word;
  if (word != keyword) throw ParseError("numerics", "expected '" + keyword + "', found '" + word + "'");
  return fields;
}

}  // namespace

void write_mlp(std::ostream& out, const MlpParams& params) {
  params.validate();
  out << "mlp " << params.layers.size() << "\n";
  out << "dims " << params.input_dim();
  for (const auto& layer : params.layers) out << ' ' << layer.weight.cols();
  out << "\nact";
  for (const auto& layer : params.layers) out << ' ' << to_string(layer.activation);
  out << "\n";
  for (const auto& layer : params.layers) {
    for (double v : layer.weight.values()) write_f64(out, v);
    for (double v : layer.bias.values()) write_f64(out, v);
  }
}

MlpParams read_mlp(std::istream& in) {
  std::size_t count = 0;
  if (!(header_line(in, "mlp") >> count) || count == 0)
    throw ParseError("numerics", "bad layer count in checkpoint");
  auto dims_line = header_line(in, "dims");
  std::vector<std::size_t> dims(count + 1);
  for (auto& d : dims)
    if (!(dims_line >> d) || d == 0) throw ParseError("numerics", "bad dims in checkpoint");
  auto act_line = header_line(in, "act");
  MlpParams params;
  for (std::size_t l = 0; l < count; ++l) {
    std::string tag;
    if (!(act_line >> tag)) throw ParseError("numerics", "missing activation tag in checkpoint");
    params.layers.push_back(DenseLayer{Matrix(dims[l], dims[l + 1]), Matrix(1, dims[l + 1]),
                                       activation_from_string(tag)});
  }
  for (auto& layer : params.layers) {
    for (double& v : layer.weight.values()) v = read_f64(in);
    for (double& v : layer.bias.values()) v = read_f64(in);
  }
  params.validate();
  return params;
}

}  // namespace msfda
