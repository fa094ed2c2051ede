#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "msfda/data/dataset.hpp"

namespace msfda {

/// Column layout of a dataset CSV. Labels are mapped to classes by lexical
/// order of their distinct string values unless `label_vocabulary` fixes
/// the order explicitly.
struct CsvSchema {
  std::vector<std::string> feature_columns;
  std::optional<std::string> label_column;
  std::optional<std::string> domain_column;
  std::optional<std::vector<std::string>> label_vocabulary;

  /// f0..f{d-1}, `label` and `domain`.
  static CsvSchema standard(std::size_t dim, bool with_label = true, bool with_domain = true);
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Header f0..f{d-1}[,label],domain. Labels are written 1-based and
/// zero-padded so lexical and numeric order coincide.
void write_csv(const std::filesystem::path& path, const Dataset& dataset);

/// Loads the standard layout, inferring d from the header.
Dataset load_standard_csv(const std::filesystem::path& path);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double value);

}  // namespace msfda
