#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "msfda/cli/config.hpp"

namespace msfda::cli {

/// Collects named artifacts in memory and publishes them together; each file
/// is written to a temporary name and renamed into place.
class ArtifactSet {
 public:
  void add(const std::string& name, std::string bytes);
  const std::map<std::string, std::string>& files() const { return files_; }
  void commit(const std::filesystem::path& dir) const;

  /// False when a verification command (theory) found a failing check.
  bool checks_passed = true;

 private:
  std::map<std::string, std::string> files_;
};

/// Computes every artifact of the configured command. Throws msfda::Error
/// on failure; nothing is written to disk.
ArtifactSet execute(const RunConfig& config);

/// Validates, executes and commits. Returns the process exit status; on
/// failure a `record=error module=<m> message=...` line goes to `err`.
int run(const RunConfig& config, std::ostream& log, std::ostream& err);

// Helpers shared with the tools and tests.
std::vector<SourceModel> load_models(const std::filesystem::path& dir);
void save_model(std::ostream& out, const SourceModel& model);
SourceModel load_model(std::istream& in);

}  // namespace msfda::cli
