#include "msfda/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "msfda/data/csv.hpp"
#include "msfda/error.hpp"

namespace msfda::cli {

namespace pt = boost::property_tree;

std::string_view to_string(Command command) {
  switch (command) {
    case Command::generate: return "generate";
    case Command::pretrain: return "pretrain";
    case Command::adapt: return "adapt";
    case Command::evaluate: return "evaluate";
    case Command::theory: return "theory";
    case Command::export_embeddings: return "export-embeddings";
  }
  return "theory";
}

Command command_from_string(std::string_view name) {
  for (Command c : {Command::generate, Command::pretrain, Command::adapt, Command::evaluate,
                    Command::theory, Command::export_embeddings})
    if (to_string(c) == name) return c;
  throw ValidationError("cli", "command: unknown command '" + std::string(name) + "'");
}

std::vector<DomainSpec> SyntheticConfig::domain_specs() const {
  const BaseMixture mixture = circle_mixture(classes, dim, radius, scale);
  std::vector<DomainSpec> specs;
  auto make = [&](const DomainEntry& e) {
    return DomainSpec{e.id, mixture,
                      DomainTransform{e.rotation_deg * std::numbers::pi / 180.0, e.translation, e.feature_noise},
                      e.label_noise, e.samples};
  };
  for (const auto& s : sources) specs.push_back(make(s));
  specs.push_back(make(target));
  return specs;
}

SyntheticConfig default_synthetic() {
  SyntheticConfig s;
  s.sources = {DomainEntry{"source1", 40.0, {}, 0.0, 0.0, 300},
               DomainEntry{"source2", 55.0, {}, 0.0, 0.0, 300},
               DomainEntry{"source3", 180.0, {}, 0.0, 0.0, 300}};
  s.target = DomainEntry{"target", 0.0, {}, 0.0, 0.0, 300};
  return s;
}

namespace {

[[noreturn]] void invalid(const std::string& key, const std::string& what) {
  throw ValidationError("cli", key + ": " + what);
}

// Reads and consumes keys of one section so leftovers can be reported.
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!tree_) return std::nullopt;
    auto child = tree_->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!child) return std::nullopt;
    return child->data();
  }

  void string(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = *v;
  }

  void path_value(const std::string& key, std::filesystem::path& out) {
    if (auto v = raw(key)) {
      if (v->empty()) invalid(path(key), "empty path");
      out = *v;
    }
  }

  void optional_path(const std::string& key, std::optional<std::filesystem::path>& out) {
    if (auto v = raw(key)) {
      if (v->empty()) invalid(path(key), "empty path");
      out = *v;
    }
  }

  void real(const std::string& key, double& out, std::function<bool(double)> ok = {},
            const char* range = "") {
    if (auto v = raw(key)) {
      out = parse_real(key, *v);
      if (ok && !ok(out)) invalid(path(key), std::string("value out of range, expected ") + range);
    }
  }

  void size(const std::string& key, std::size_t& out, std::size_t min = 0) {
    if (auto v = raw(key)) {
      out = parse_size(key, *v);
      if (out < min) invalid(path(key), "value must be >= " + std::to_string(min));
    }
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (auto v = raw(key)) out = parse_size(key, *v);
  }

  void boolean(const std::string& key, bool& out) {
    if (auto v = raw(key)) {
      if (*v == "true") out = true;
      else if (*v == "false") out = false;
      else invalid(path(key), "expected true or false, got '" + *v + "'");
    }
  }

  void real_list(const std::string& key, std::vector<double>& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& item : split(*v)) out.push_back(parse_real(key, item));
    }
  }

  void size_list(const std::string& key, std::vector<std::size_t>& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& item : split(*v)) out.push_back(parse_size(key, item));
    }
  }

  void string_list(const std::string& key, std::vector<std::string>& out) {
    if (auto v = raw(key)) out = split(*v);
  }

  void path_list(const std::string& key, std::vector<std::filesystem::path>& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& item : split(*v)) out.emplace_back(item);
    }
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_)
      if (!used_.contains(key)) invalid(path(key), "unknown key");
  }

 private:
  static std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    if (text.empty()) return out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(boost::algorithm::trim_copy(item));
    return out;
  }

  double parse_real(const std::string& key, const std::string& text) const {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
      invalid(path(key), "expected a number, got '" + text + "'");
    return v;
  }

  std::uint64_t parse_size(const std::string& key, const std::string& text) const {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
      invalid(path(key), "expected a non-negative integer, got '" + text + "'");
    return v;
  }

  std::string name_;
  const pt::ptree* tree_;
  std::set<std::string> used_;
};

bool positive(double v) { return v > 0.0; }
bool non_negative(double v) { return v >= 0.0; }
bool unit_momentum(double v) { return v >= 0.0 && v < 1.0; }

void read_domain(Section& s, DomainEntry& e) {
  s.real("rotation_deg", e.rotation_deg);
  s.real_list("translation", e.translation);
  s.real("feature_noise", e.feature_noise, non_negative, ">= 0");
  s.real("label_noise", e.label_noise, [](double v) { return v >= 0.0 && v < 0.5; }, "[0, 0.5)");
  s.size("samples", e.samples, 1);
  s.reject_unknown();
}

const pt::ptree* section(const pt::ptree& root, const std::string& name) {
  auto child = root.get_child_optional(pt::ptree::path_type(name, '\0'));
  return child ? &*child : nullptr;
}

}  // namespace

RunConfig parse_config(std::istream& in, const ConfigOverrides& overrides) {
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("cli", std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  RunConfig c;
  std::set<std::string> known_sections{"paths", "synthetic", "target", "csv", "pretrain", "adapt", "theory"};

  Section top("", &root);
  if (auto cmd = top.raw("command")) {
    c.command = command_from_string(*cmd);
    if (overrides.command && *overrides.command != c.command)
      invalid("command", "file says '" + *cmd + "' but '" + std::string(to_string(*overrides.command)) +
                             "' was requested");
  } else if (overrides.command) {
    c.command = *overrides.command;
  } else {
    invalid("command", "missing required field");
  }
  if (overrides.seed) {
    top.raw("seed");
    c.seed = *overrides.seed;
  } else if (top.raw("seed")) {
    top.u64("seed", c.seed);
  } else {
    invalid("seed", "missing required field");
  }
  // Sections are children with children; everything else at the top level
  // must be a known key.
  std::size_t source_count = 0;
  for (const auto& [key, child] : root) {
    if (known_sections.contains(key)) {
      top.raw(key);
      continue;
    }
    if (key.rfind("source", 0) == 0 && key.size() > 6) {
      const std::string digits = key.substr(6);
      std::size_t idx = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
      if (ec == std::errc() && ptr == digits.data() + digits.size() && idx >= 1) {
        top.raw(key);
        source_count = std::max(source_count, idx);
        continue;
      }
    }
    if (!child.empty()) invalid(key, "unknown section");
  }
  top.reject_unknown();

  Section paths("paths", section(root, "paths"));
  paths.path_value("data", c.paths.data);
  paths.path_value("models", c.paths.models);
  paths.optional_path("partition", c.paths.partition);
  paths.path_value("out", c.paths.out);
  paths.reject_unknown();
  if (overrides.out) c.paths.out = *overrides.out;

  if (source_count == 0) {
    c.synthetic = default_synthetic();
  } else {
    c.synthetic.sources.clear();
    c.synthetic.target = default_synthetic().target;
    for (std::size_t j = 1; j <= source_count; ++j) {
      const std::string name = "source" + std::to_string(j);
      const pt::ptree* tree = section(root, name);
      if (!tree) invalid(name, "missing section (sources must be numbered 1..m)");
      DomainEntry e;
      e.id = name;
      Section s(name, tree);
      read_domain(s, e);
      c.synthetic.sources.push_back(std::move(e));
    }
  }
  Section synth("synthetic", section(root, "synthetic"));
  synth.size("classes", c.synthetic.classes, 2);
  synth.size("dim", c.synthetic.dim, 2);
  synth.real("radius", c.synthetic.radius, positive, "> 0");
  synth.real("scale", c.synthetic.scale, non_negative, ">= 0");
  synth.reject_unknown();
  if (const pt::ptree* tree = section(root, "target")) {
    Section s("target", tree);
    read_domain(s, c.synthetic.target);
  }
  for (const auto* e : [&] {
         std::vector<const DomainEntry*> all;
         for (const auto& s : c.synthetic.sources) all.push_back(&s);
         all.push_back(&c.synthetic.target);
         return all;
       }()) {
    if (!e->translation.empty() && e->translation.size() != c.synthetic.dim)
      invalid(e->id + ".translation", "length must equal synthetic.dim");
  }

  Section csv("csv", section(root, "csv"));
  csv.string_list("features", c.csv.feature_columns);
  csv.string("label", c.csv.label_column);
  csv.string("domain", c.csv.domain_column);
  csv.path_list("sources", c.csv.sources);
  csv.optional_path("target", c.csv.target);
  csv.optional_path("truth", c.csv.truth);
  csv.reject_unknown();

  Section pre("pretrain", section(root, "pretrain"));
  pre.size("epochs", c.pretrain.epochs);
  pre.size("batch_size", c.pretrain.batch_size, 1);
  pre.real("lr", c.pretrain.optimizer.learning_rate, positive, "> 0");
  pre.real("momentum", c.pretrain.optimizer.momentum, unit_momentum, "[0, 1)");
  pre.real("weight_decay", c.pretrain.optimizer.weight_decay, non_negative, ">= 0");
  pre.size("hidden", c.architecture.hidden, 1);
  pre.size("feature_dim", c.architecture.feature_dim, 1);
  pre.reject_unknown();

  Section ad("adapt", section(root, "adapt"));
  auto& a = c.adapt;
  ad.size("iterations", a.iterations);
  ad.size("inner_epochs", a.inner_epochs);
  ad.size("batch_size", a.batch_size, 1);
  ad.real("lr_extractor", a.extractor_optimizer.learning_rate, positive, "> 0");
  ad.real("lr_discriminator", a.discriminator_optimizer.learning_rate, positive, "> 0");
  double momentum = a.extractor_optimizer.momentum;
  double decay = a.extractor_optimizer.weight_decay;
  ad.real("momentum", momentum, unit_momentum, "[0, 1)");
  ad.real("weight_decay", decay, non_negative, ">= 0");
  a.extractor_optimizer.momentum = a.discriminator_optimizer.momentum = momentum;
  a.extractor_optimizer.weight_decay = a.discriminator_optimizer.weight_decay = decay;
  ad.size("discriminator_hidden", a.discriminator_hidden, 1);
  ad.real("lambda_im", a.loss_weights.info_max, non_negative, ">= 0");
  ad.real("lambda_adv", a.loss_weights.adversarial, non_negative, ">= 0");
  ad.real("beta", a.schedule.beta, positive, "> 0");
  ad.real("gamma", a.schedule.gamma, [](double v) { return v > 0.0 && v <= 1.0; }, "(0, 1]");
  ad.real("temperature", a.temperature, positive, "> 0");
  if (auto mode = ad.raw("selection")) {
    try {
      a.selection = selection_mode_from_string(*mode);
    } catch (const ValidationError&) {
      invalid("adapt.selection", "expected threshold, oracle or unselective");
    }
  }
  ad.boolean("ablate_alignment", a.ablate_alignment);
  ad.boolean("ablate_denoise", a.ablate_denoise);
  ad.size("workers", a.workers, 1);
  ad.reject_unknown();
  a.seed = c.seed;

  Section th("theory", section(root, "theory"));
  th.size("instances", c.theory.instances, 1);
  th.size("max_instance_size", c.theory.max_instance_size, 2);
  th.size("max_classes", c.theory.max_classes, 2);
  th.size("sources", c.theory.sources, 1);
  th.real("sparsity", c.theory.sparsity, [](double v) { return v >= 0.0 && v < 1.0; }, "[0, 1)");
  th.size_list("grid", c.theory.grid);
  th.size("trials", c.theory.trials, 1);
  th.reject_unknown();
  if (c.theory.max_instance_size > 16) invalid("theory.max_instance_size", "value must be <= 16");
  if (c.theory.max_classes > 4) invalid("theory.max_classes", "value must be <= 4");
  if (c.theory.grid.empty()) invalid("theory.grid", "at least one sample size required");
  for (std::size_t n : c.theory.grid)
    if (n == 0) invalid("theory.grid", "sample sizes must be positive");
  return c;
}

RunConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cli", "config: cannot open '" + path.string() + "'");
  return parse_config(in, overrides);
}

namespace {

template <typename T, typename Fn>
std::string join(const std::vector<T>& items, Fn fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + fmt(items[i]);
  return out;
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

void write_domain(std::ostringstream& out, const std::string& name, const DomainEntry& e) {
  out << "\n[" << name << "]\n"
      << "rotation_deg = " << format_double(e.rotation_deg) << "\n";
  if (!e.translation.empty())
    out << "translation = " << join(e.translation, [](double v) { return format_double(v); }) << "\n";
  out << "feature_noise = " << format_double(e.feature_noise) << "\n"
      << "label_noise = " << format_double(e.label_noise) << "\n"
      << "samples = " << e.samples << "\n";
}

}  // namespace

std::string write_config(const RunConfig& c) {
  std::ostringstream out;
  out << "command = " << to_string(c.command) << "\n"
      << "seed = " << c.seed << "\n";

  out << "\n[paths]\n"
      << "data = " << c.paths.data.string() << "\n"
      << "models = " << c.paths.models.string() << "\n";
  if (c.paths.partition) out << "partition = " << c.paths.partition->string() << "\n";
  out << "out = " << c.paths.out.string() << "\n";

  out << "\n[synthetic]\n"
      << "classes = " << c.synthetic.classes << "\n"
      << "dim = " << c.synthetic.dim << "\n"
      << "radius = " << format_double(c.synthetic.radius) << "\n"
      << "scale = " << format_double(c.synthetic.scale) << "\n";
  for (std::size_t j = 0; j < c.synthetic.sources.size(); ++j)
    write_domain(out, "source" + std::to_string(j + 1), c.synthetic.sources[j]);
  write_domain(out, "target", c.synthetic.target);

  out << "\n[csv]\n";
  if (!c.csv.feature_columns.empty())
    out << "features = " << join(c.csv.feature_columns, [](const std::string& s) { return s; }) << "\n";
  out << "label = " << c.csv.label_column << "\n"
      << "domain = " << c.csv.domain_column << "\n";
  if (!c.csv.sources.empty())
    out << "sources = " << join(c.csv.sources, [](const std::filesystem::path& p) { return p.string(); }) << "\n";
  if (c.csv.target) out << "target = " << c.csv.target->string() << "\n";
  if (c.csv.truth) out << "truth = " << c.csv.truth->string() << "\n";

  out << "\n[pretrain]\n"
      << "epochs = " << c.pretrain.epochs << "\n"
      << "batch_size = " << c.pretrain.batch_size << "\n"
      << "lr = " << format_double(c.pretrain.optimizer.learning_rate) << "\n"
      << "momentum = " << format_double(c.pretrain.optimizer.momentum) << "\n"
      << "weight_decay = " << format_double(c.pretrain.optimizer.weight_decay) << "\n"
      << "hidden = " << c.architecture.hidden << "\n"
      << "feature_dim = " << c.architecture.feature_dim << "\n";

  const auto& a = c.adapt;
  out << "\n[adapt]\n"
      << "iterations = " << a.iterations << "\n"
      << "inner_epochs = " << a.inner_epochs << "\n"
      << "batch_size = " << a.batch_size << "\n"
      << "lr_extractor = " << format_double(a.extractor_optimizer.learning_rate) << "\n"
      << "lr_discriminator = " << format_double(a.discriminator_optimizer.learning_rate) << "\n"
      << "momentum = " << format_double(a.extractor_optimizer.momentum) << "\n"
      << "weight_decay = " << format_double(a.extractor_optimizer.weight_decay) << "\n"
      << "discriminator_hidden = " << a.discriminator_hidden << "\n"
      << "lambda_im = " << format_double(a.loss_weights.info_max) << "\n"
      << "lambda_adv = " << format_double(a.loss_weights.adversarial) << "\n"
      << "beta = " << format_double(a.schedule.beta) << "\n"
      << "gamma = " << format_double(a.schedule.gamma) << "\n"
      << "temperature = " << format_double(a.temperature) << "\n"
      << "selection = " << to_string(a.selection) << "\n"
      << "ablate_alignment = " << fmt_bool(a.ablate_alignment) << "\n"
      << "ablate_denoise = " << fmt_bool(a.ablate_denoise) << "\n"
      << "workers = " << a.workers << "\n";

  out << "\n[theory]\n"
      << "instances = " << c.theory.instances << "\n"
      << "max_instance_size = " << c.theory.max_instance_size << "\n"
      << "max_classes = " << c.theory.max_classes << "\n"
      << "sources = " << c.theory.sources << "\n"
      << "sparsity = " << format_double(c.theory.sparsity) << "\n"
      << "grid = " << join(c.theory.grid, [](std::size_t n) { return std::to_string(n); }) << "\n"
      << "trials = " << c.theory.trials << "\n";
  return out.str();
}

void validate_paths(const RunConfig& c) {
  namespace fs = std::filesystem;
  auto require = [](const fs::path& p, const std::string& key) {
    if (!fs::exists(p)) invalid(key, "path '" + p.string() + "' does not exist");
  };
  const bool external_sources = !c.csv.sources.empty();
  const bool external_target = c.csv.target.has_value();
  switch (c.command) {
    case Command::generate:
    case Command::theory:
      break;
    case Command::pretrain:
      if (external_sources) {
        for (const auto& p : c.csv.sources) require(p, "csv.sources");
      } else {
        require(c.paths.data, "paths.data");
      }
      break;
    case Command::adapt:
    case Command::evaluate:
    case Command::export_embeddings:
      require(c.paths.models, "paths.models");
      if (external_target) require(*c.csv.target, "csv.target");
      else require(c.paths.data / "target.csv", "paths.data");
      if (c.csv.truth) require(*c.csv.truth, "csv.truth");
      if (c.command == Command::evaluate && !c.csv.truth) {
        if (external_target) invalid("csv.truth", "evaluate needs hidden truth for an external target");
        require(c.paths.data / "target_truth.csv", "paths.data");
      }
      if (c.paths.partition) require(*c.paths.partition, "paths.partition");
      break;
  }
}

}  // namespace msfda::cli
