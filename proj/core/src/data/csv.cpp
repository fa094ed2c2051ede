#include "msfda/data/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/tokenizer.hpp>

#include "msfda/error.hpp"

namespace msfda {

namespace {

using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

std::vector<std::string> split_row(const std::string& line) {
  std::string trimmed = line;
  if (!trimmed.empty() && trimmed.back() == '\r') trimmed.pop_back();
  Tokenizer tok(trimmed);
  return {tok.begin(), tok.end()};
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::string padded_label(std::size_t label, std::size_t classes) {
  std::string digits = std::to_string(label + 1);
  const std::size_t width = std::to_string(classes).size();
  return std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

}  // namespace

CsvSchema CsvSchema::standard(std::size_t dim, bool with_label, bool with_domain) {
  CsvSchema schema;
  for (std::size_t j = 0; j < dim; ++j) schema.feature_columns.push_back("f" + std::to_string(j));
  if (with_label) schema.label_column = "label";
  if (with_domain) schema.domain_column = "domain";
  return schema;
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path.string() + "' has no header row");
  const auto header = split_row(line);

  std::vector<std::size_t> feature_idx;
  for (const auto& name : schema.feature_columns) feature_idx.push_back(column_index(header, name));
  if (feature_idx.empty()) throw SchemaError("schema lists no feature columns");
  std::optional<std::size_t> label_idx, domain_idx;
  if (schema.label_column) label_idx = column_index(header, *schema.label_column);
  if (schema.domain_column) domain_idx = column_index(header, *schema.domain_column);

  std::vector<double> values;
  std::vector<std::string> raw_labels;
  std::string domain;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_row(line);
    const std::size_t row_number = rows + 1;
    if (cells.size() != header.size()) {
      throw ParseError("data", path.string() + ": row " + std::to_string(row_number) + " has " +
                                   std::to_string(cells.size()) + " fields, header has " +
                                   std::to_string(header.size()));
    }
    for (std::size_t idx : feature_idx) {
      const std::string& cell = cells[idx];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw ParseError("data", path.string() + ": row " + std::to_string(row_number) +
                                     " column '" + header[idx] + "': not a number '" + cell + "'");
      }
      values.push_back(v);
    }
    if (label_idx) raw_labels.push_back(cells[*label_idx]);
    if (domain_idx && rows == 0) domain = cells[*domain_idx];
    ++rows;
  }
  if (rows == 0) throw ValidationError("data", "'" + path.string() + "' has no data rows");

  Dataset out{Matrix(rows, feature_idx.size(), std::move(values)), std::nullopt,
              domain.empty() ? path.stem().string() : domain, 0};
  if (label_idx) {
    std::vector<std::string> vocabulary;
    if (schema.label_vocabulary) {
      vocabulary = *schema.label_vocabulary;
    } else {
      std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
      vocabulary.assign(distinct.begin(), distinct.end());
    }
    std::map<std::string, std::size_t> lookup;
    for (std::size_t k = 0; k < vocabulary.size(); ++k) lookup.emplace(vocabulary[k], k);
    std::vector<std::size_t> labels(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      auto it = lookup.find(raw_labels[i]);
      if (it == lookup.end())
        throw ParseError("data", path.string() + ": row " + std::to_string(i + 1) +
                                     ": label '" + raw_labels[i] + "' not in vocabulary");
      labels[i] = it->second;
    }
    out.labels = std::move(labels);
    out.num_classes = vocabulary.size();
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& dataset) {
  std::ostringstream out;
  for (std::size_t j = 0; j < dataset.dim(); ++j) out << (j ? "," : "") << 'f' << j;
  if (dataset.labels) out << ",label";
  out << ",domain\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t j = 0; j < dataset.dim(); ++j)
      out << (j ? "," : "") << format_double(dataset.features(i, j));
    if (dataset.labels) out << ',' << padded_label((*dataset.labels)[i], dataset.num_classes);
    out << ',' << dataset.domain << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw SchemaError("cannot write '" + path.string() + "'");
  file << out.str();
}

Dataset load_standard_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  const auto header = split_row(line);
  std::size_t dim = 0;
  while (std::find(header.begin(), header.end(), "f" + std::to_string(dim)) != header.end()) ++dim;
  const bool has_label = std::find(header.begin(), header.end(), "label") != header.end();
  const bool has_domain = std::find(header.begin(), header.end(), "domain") != header.end();
  return load_csv(path, CsvSchema::standard(dim, has_label, has_domain));
}

}  // namespace msfda
