#include <iostream>

#include "CLI11.hpp"
#include "msfda/cli/runner.hpp"
#include "msfda/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-source-free domain adaptation lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  for (const char* name : {"generate", "pretrain", "adapt", "evaluate", "theory", "export-embeddings"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "INI configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out, "override paths.out");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string requested = app.get_subcommands().front()->get_name();
  try {
    msfda::cli::ConfigOverrides overrides;
    overrides.command = msfda::cli::command_from_string(requested);
    overrides.seed = seed;
    if (out) overrides.out = *out;
    const auto config = msfda::cli::parse_config(std::filesystem::path(config_path), overrides);
    return msfda::cli::run(config, std::cout, std::cerr);
  } catch (const msfda::Error& e) {
    std::cerr << "record=error module=" << e.module() << " message=\"" << e.what() << "\"\n";
    return 2;
  }
}
