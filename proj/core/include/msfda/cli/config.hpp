#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msfda/data/pretrain.hpp"
#include "msfda/data/synthetic.hpp"
#include "msfda/engine/engine.hpp"

namespace msfda::cli {

enum class Command { generate, pretrain, adapt, evaluate, theory, export_embeddings };

std::string_view to_string(Command command);
Command command_from_string(std::string_view name);

struct DomainEntry {
  std::string id;
  double rotation_deg = 0.0;
  std::vector<double> translation;
  double feature_noise = 0.0;
  double label_noise = 0.0;
  std::size_t samples = 300;

  friend bool operator==(const DomainEntry&, const DomainEntry&) = default;
};

struct SyntheticConfig {
  std::size_t classes = 3;
  std::size_t dim = 2;
  double radius = 3.0;
  double scale = 0.8;
  std::vector<DomainEntry> sources;
  DomainEntry target;

  /// Domain specs in generation order: sources, then target.
  std::vector<DomainSpec> domain_specs() const;

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

/// External CSV datasets. When `sources`/`target` are set they replace the
/// files produced by `generate`.
struct CsvConfig {
  std::vector<std::string> feature_columns;  // empty: f0..f{d-1} from the header
  std::string label_column = "label";
  std::string domain_column = "domain";
  std::vector<std::filesystem::path> sources;
  std::optional<std::filesystem::path> target;
  std::optional<std::filesystem::path> truth;

  friend bool operator==(const CsvConfig&, const CsvConfig&) = default;
};

struct PathsConfig {
  std::filesystem::path data = "data";
  std::filesystem::path models = "models";
  std::optional<std::filesystem::path> partition;
  std::filesystem::path out = "out";

  friend bool operator==(const PathsConfig&, const PathsConfig&) = default;
};

struct TheoryConfig {
  std::size_t instances = 1000;
  std::size_t max_instance_size = 8;
  std::size_t max_classes = 3;
  std::size_t sources = 3;
  double sparsity = 0.3;
  std::vector<std::size_t> grid{25, 100, 400, 1600};
  std::size_t trials = 2000;

  friend bool operator==(const TheoryConfig&, const TheoryConfig&) = default;
};

struct RunConfig {
  Command command = Command::theory;
  std::uint64_t seed = 0;
  PathsConfig paths;
  SyntheticConfig synthetic;
  CsvConfig csv;
  Architecture architecture;
  PretrainConfig pretrain;
  AdaptationConfig adapt;
  TheoryConfig theory;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Three sources at 40, 55 and 180 degrees with the target at 0 degrees;
/// the last source is the deliberately mismatched one.
SyntheticConfig default_synthetic();

struct ConfigOverrides {
  std::optional<Command> command;  // must agree with the file when both are set
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

/// Parses `key = value` text with `[section]` headers. Unknown keys, missing
/// required fields and out-of-range values raise ValidationError naming the
/// key path (e.g. `adapt.batch_size`).
RunConfig parse_config(std::istream& in, const ConfigOverrides& overrides = {});
RunConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// Effective configuration in the same format; parse_config(write_config(c)) == c.
std::string write_config(const RunConfig& config);

/// Checks that the input paths the command will read exist.
void validate_paths(const RunConfig& config);

}  // namespace msfda::cli
