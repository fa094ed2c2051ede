#include "msfda/cli/runner.hpp"

#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "msfda/cli/embeddings.hpp"
#include "msfda/data/csv.hpp"
#include "msfda/error.hpp"
#include "msfda/numerics/checkpoint.hpp"
#include "msfda/theory/theory.hpp"

namespace msfda::cli {

namespace fs = std::filesystem;

void ArtifactSet::add(const std::string& name, std::string bytes) { files_[name] = std::move(bytes); }

void ArtifactSet::commit(const fs::path& dir) const {
  fs::create_directories(dir);
  const std::string suffix = ".tmp-" + std::to_string(::getpid());
  for (const auto& [name, bytes] : files_) {
    const fs::path final_path = dir / name;
    const fs::path temp_path = dir / (name + suffix);
    {
      std::ofstream out(temp_path, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cli", "cannot write '" + temp_path.string() + "'");
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw Error("cli", "short write to '" + temp_path.string() + "'");
    }
    fs::rename(temp_path, final_path);
  }
}

void save_model(std::ostream& out, const SourceModel& model) {
  model.validate();
  out << "source-model " << model.domain << "\n";
  write_mlp(out, model.extractor);
  write_mlp(out, model.classifier);
}

SourceModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("source-model ", 0) != 0)
    throw ParseError("numerics", "not a source-model checkpoint");
  SourceModel model;
  model.domain = line.substr(13);
  model.extractor = read_mlp(in);
  model.classifier = read_mlp(in);
  model.validate();
  return model;
}

std::vector<SourceModel> load_models(const fs::path& dir) {
  std::vector<SourceModel> models;
  for (std::size_t j = 1;; ++j) {
    const fs::path p = dir / ("model_" + std::to_string(j) + ".ckpt");
    if (!fs::exists(p)) break;
    std::ifstream in(p, std::ios::binary);
    models.push_back(load_model(in));
  }
  if (models.empty()) throw ValidationError("cli", "paths.models: no model_1.ckpt in '" + dir.string() + "'");
  return models;
}

namespace {

std::string model_bytes(const SourceModel& model) {
  std::ostringstream out(std::ios::binary);
  save_model(out, model);
  return out.str();
}

std::string dataset_bytes(const Dataset& ds) {
  // write_csv targets a path; render through a scratch file-free route
  std::ostringstream out;
  for (std::size_t j = 0; j < ds.dim(); ++j) out << (j ? "," : "") << 'f' << j;
  if (ds.labels) out << ",label";
  out << ",domain\n";
  const std::size_t width = std::to_string(ds.num_classes).size();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) out << (j ? "," : "") << format_double(ds.features(i, j));
    if (ds.labels) {
      std::string digits = std::to_string((*ds.labels)[i] + 1);
      out << ',' << std::string(width > digits.size() ? width - digits.size() : 0, '0') << digits;
    }
    out << ',' << ds.domain << '\n';
  }
  return out.str();
}

CsvSchema schema_for(const RunConfig& c, const fs::path& path, bool with_label) {
  if (c.csv.feature_columns.empty()) {
    Dataset probe = load_standard_csv(path);  // infers f0..f{d-1}
    CsvSchema s = CsvSchema::standard(probe.dim(), false, false);
    if (with_label) s.label_column = c.csv.label_column;
    return s;
  }
  CsvSchema s;
  s.feature_columns = c.csv.feature_columns;
  if (with_label) s.label_column = c.csv.label_column;
  return s;
}

Dataset load_dataset(const RunConfig& c, const fs::path& path, bool with_label) {
  CsvSchema schema = schema_for(c, path, with_label);
  // the domain column is optional in external files
  std::ifstream probe(path);
  std::string header;
  std::getline(probe, header);
  if (header.find(c.csv.domain_column) != std::string::npos) schema.domain_column = c.csv.domain_column;
  return load_csv(path, schema);
}

Dataset load_target(const RunConfig& c) {
  const fs::path path = c.csv.target ? *c.csv.target : c.paths.data / "target.csv";
  Dataset target = load_dataset(c, path, false);
  return target;
}

std::optional<HiddenTruth> load_truth(const RunConfig& c, std::size_t classes, std::size_t n) {
  fs::path path;
  if (c.csv.truth) path = *c.csv.truth;
  else if (!c.csv.target && fs::exists(c.paths.data / "target_truth.csv")) path = c.paths.data / "target_truth.csv";
  else return std::nullopt;
  Dataset truth = load_dataset(c, path, true);
  if (truth.size() != n) throw ValidationError("cli", "csv.truth: row count differs from the target");
  if (truth.num_classes != classes)
    throw ValidationError("cli", "csv.truth: " + std::to_string(truth.num_classes) +
                                     " distinct labels, models have " + std::to_string(classes) + " classes");
  return HiddenTruth{*truth.labels};
}

std::vector<fs::path> source_paths(const RunConfig& c) {
  if (!c.csv.sources.empty()) return c.csv.sources;
  std::vector<fs::path> paths;
  for (std::size_t j = 1;; ++j) {
    fs::path p = c.paths.data / ("source_" + std::to_string(j) + ".csv");
    if (!fs::exists(p)) break;
    paths.push_back(p);
  }
  if (paths.empty()) throw ValidationError("cli", "paths.data: no source_1.csv in '" + c.paths.data.string() + "'");
  return paths;
}

std::string weights_bytes(const DomainWeights& w) {
  std::string out = "weights=";
  for (std::size_t j = 0; j < w.size(); ++j) out += (j ? "," : "") + format_double(w[j]);
  return out + "\n";
}

std::optional<DomainWeights> load_weights(const fs::path& dir, std::size_t m) {
  std::ifstream in(dir / "domain-weights.txt");
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  if (line.rfind("weights=", 0) != 0) throw ParseError("cli", "domain-weights.txt: malformed");
  DomainWeights w;
  std::stringstream items(line.substr(8));
  std::string item;
  while (std::getline(items, item, ',')) w.values.push_back(std::stod(item));
  if (w.size() != m) throw ValidationError("cli", "domain-weights.txt: one weight per model required");
  return w;
}

void run_generate(const RunConfig& c, ArtifactSet& out) {
  const auto specs = c.synthetic.domain_specs();
  MultiSourceData data = generate_multi_source(specs, c.seed);
  for (std::size_t j = 0; j < data.sources.size(); ++j)
    out.add("source_" + std::to_string(j + 1) + ".csv", dataset_bytes(data.sources[j]));
  out.add("target.csv", dataset_bytes(data.target));
  Dataset truth = data.target;
  truth.labels = data.truth.labels;
  out.add("target_truth.csv", dataset_bytes(truth));
}

void run_pretrain(const RunConfig& c, ArtifactSet& out) {
  std::ostringstream report;
  const auto paths = source_paths(c);
  for (std::size_t j = 0; j < paths.size(); ++j) {
    Dataset ds = load_dataset(c, paths[j], true);
    SourceModel model = pretrain_source(ds, c.architecture, c.pretrain, c.seed);
    out.add("model_" + std::to_string(j + 1) + ".ckpt", model_bytes(model));
    report << "record=pretrain model=" << j + 1 << " domain=" << model.domain
           << " samples=" << ds.size() << " train_accuracy="
           << format_double(accuracy(model, ds.features, *ds.labels)) << "\n";
  }
  out.add("pretrain-report.txt", report.str());
}

void run_adapt(const RunConfig& c, ArtifactSet& out) {
  const auto models = load_models(c.paths.models);
  const Dataset target = load_target(c);
  const auto truth = load_truth(c, models.front().num_classes(), target.size());
  const AdaptationResult result = adapt(models, target, c.adapt, truth ? &*truth : nullptr);

  for (std::size_t j = 0; j < result.models.size(); ++j)
    out.add("model_" + std::to_string(j + 1) + ".ckpt", model_bytes(result.models[j]));
  std::string metrics;
  for (const auto& m : result.metrics) metrics += format_metrics(m) + "\n";
  out.add("metrics.log", metrics);
  out.add("summary.log", format_summary(result, truth ? &*truth : nullptr, models, target) + "\n");
  out.add("domain-weights.txt", weights_bytes(result.weights));
  std::ostringstream part;
  write_partition_csv(part, result.final_partition);
  out.add("partition.csv", part.str());
}

void run_evaluate(const RunConfig& c, ArtifactSet& out) {
  const auto models = load_models(c.paths.models);
  const Dataset target = load_target(c);
  const auto truth = load_truth(c, models.front().num_classes(), target.size());
  if (!truth) throw ValidationError("cli", "csv.truth: evaluate needs hidden truth");
  const DomainWeights w = load_weights(c.paths.models, models.size()).value_or(domain_weights(models, target));
  std::ostringstream report;
  report << "record=evaluate samples=" << target.size() << " models=" << models.size()
         << " accuracy=" << format_double(evaluate(models, w, target, *truth)) << "\n";
  for (std::size_t j = 0; j < models.size(); ++j) {
    report << "record=evaluate_model model=" << j + 1 << " domain=" << models[j].domain
           << " weight=" << format_double(w[j])
           << " accuracy=" << format_double(accuracy(models[j], target.features, truth->labels)) << "\n";
  }
  out.add("evaluation.txt", report.str());
}

void run_export(const RunConfig& c, ArtifactSet& out) {
  const auto models = load_models(c.paths.models);
  const Dataset target = load_target(c);
  const auto truth = load_truth(c, models.front().num_classes(), target.size());
  Partition part;
  if (c.paths.partition) {
    std::ifstream in(*c.paths.partition);
    part = read_partition_csv(in);
    if (part.size() != target.size())
      throw ValidationError("cli", "paths.partition: row count differs from the target");
  } else {
    const DomainWeights w = domain_weights(models, target);
    const FusedLabels fused = initial_pseudo_labels(models, target, w, c.adapt);
    part = partition(fused, alpha_schedule(c.adapt.schedule, 1, fused.scores));
  }
  out.add("embeddings.csv", export_embeddings(models, target, part, truth ? &*truth : nullptr));
}

// Instance whose single source matches the target on the region and
// contradicts it (zero target mass on the source's label) elsewhere.
theory::DiscreteInstance mismatch_instance() {
  theory::DiscreteInstance inst;
  inst.target_marginal = {0.3, 0.25, 0.25, 0.2};
  inst.target_conditional = Matrix::from_rows({{0.9, 0.1}, {0.2, 0.8}, {1.0, 0.0}, {0.0, 1.0}});
  inst.source_conditionals = {Matrix::from_rows({{0.9, 0.1}, {0.2, 0.8}, {0.3, 0.7}, {0.6, 0.4}})};
  inst.region = {1, 1, 0, 0};
  return inst;
}

void run_theory(const RunConfig& c, ArtifactSet& out) {
  using namespace theory;
  const auto& t = c.theory;
  std::ostringstream report;
  bool all_pass = true;
  Rng rng = make_rng(c.seed, "theory");
  std::uniform_int_distribution<std::size_t> size_dist(2, t.max_instance_size);
  std::uniform_int_distribution<std::size_t> class_dist(2, t.max_classes);
  std::normal_distribution<double> tilt(0.0, 1.0);

  std::size_t violations = 0, checked = 0, trivial = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.instances; ++i) {
    DiscreteInstance inst = random_instance(rng, size_dist(rng), class_dist(rng), t.sources, t.sparsity);
    const Matrix target_joint = product_joint(inst.target_marginal, inst.target_conditional);
    // Reweighted target restricted to the region: finite KL by construction.
    Matrix labeled = target_joint;
    double mass = 0.0;
    for (std::size_t x = 0; x < labeled.rows(); ++x)
      for (std::size_t y = 0; y < labeled.cols(); ++y) {
        labeled(x, y) = inst.region[x] ? labeled(x, y) * std::exp(tilt(rng)) : 0.0;
        mass += labeled(x, y);
      }
    if (mass == 0.0) labeled = target_joint;
    else for (double& v : labeled.values()) v /= mass;

    for (const Matrix* joint : {&labeled}) {
      const auto r = bias_bound_check(*joint, target_joint, c.seed + i);
      const bool pass = r.passed();
      all_pass = all_pass && pass;
      violations += r.violations;
      checked += r.hypotheses_checked;
      trivial += r.kl_infinite;
      worst = std::max(worst, r.max_violation);
      report << format_record("bias_bound_check", inst.digest(),
                              {{"kind", "reweighted"},
                               {"size", std::to_string(inst.instance_size())},
                               {"classes", std::to_string(inst.num_classes())},
                               {"kl", format_double(r.kl)},
                               {"bound", format_double(r.bound)},
                               {"max_violation", format_double(r.max_violation)},
                               {"hypotheses", std::to_string(r.hypotheses_checked)},
                               {"exhaustive", r.exhaustive ? "true" : "false"}},
                              pass)
             << "\n";
    }
    const auto sel = bias_bound_check(selective_joint(inst, 0), target_joint, c.seed + i);
    all_pass = all_pass && sel.passed();
    violations += sel.violations;
    checked += sel.hypotheses_checked;
    trivial += sel.kl_infinite;
    if (!sel.kl_infinite) worst = std::max(worst, sel.max_violation);
    report << format_record("bias_bound_check", inst.digest(),
                            {{"kind", "selective"},
                             {"kl", format_double(sel.kl)},
                             {"max_violation", format_double(sel.max_violation)},
                             {"hypotheses", std::to_string(sel.hypotheses_checked)},
                             {"trivial", sel.kl_infinite ? "true" : "false"}},
                            sel.passed())
           << "\n";
  }
  report << format_record("bias_bound_sweep", "-",
                          {{"instances", std::to_string(t.instances)},
                           {"hypotheses", std::to_string(checked)},
                           {"violations", std::to_string(violations)},
                           {"trivial_infinite_kl", std::to_string(trivial)},
                           {"max_violation", format_double(worst)}},
                          violations == 0)
         << "\n";

  {
    const DiscreteInstance inst = mismatch_instance();
    const double unsel = unselective_bias(inst, 0);
    const SelectiveBias sel = selective_bias(inst, 0);
    const double direct = kl_joint(selective_joint(inst, 0),
                                   product_joint(inst.target_marginal, inst.target_conditional));
    const bool pass = std::isinf(unsel) && std::abs(direct - sel.bias) <= 1e-9;
    all_pass = all_pass && pass;
    report << format_record("selective_vs_unselective", inst.digest(),
                            {{"unselective_bias", format_double(unsel)},
                             {"selective_bias", format_double(sel.bias)},
                             {"selective_kl_direct", format_double(direct)},
                             {"bound_term", format_double(sel.bound_term)}},
                            pass)
           << "\n";
  }

  {
    const Matrix joint = Matrix::from_rows({{0.20, 0.05}, {0.10, 0.15}, {0.25, 0.05}, {0.05, 0.15}});
    const Hypothesis h{0, 1, 0, 1};
    const auto rows = variance_decay_sim(joint, h, t.grid, t.trials, c.seed);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::vector<std::pair<std::string, std::string>> fields{
          {"n_l", std::to_string(rows[i].sample_size)},
          {"gap_p95", format_double(rows[i].gap_p95)},
          {"mean_gap", format_double(rows[i].mean_gap)}};
      bool pass = true;
      if (i > 0 && rows[i].sample_size == 4 * rows[i - 1].sample_size && rows[i - 1].gap_p95 > 0.0) {
        const double ratio = rows[i].gap_p95 / rows[i - 1].gap_p95;
        fields.emplace_back("ratio_to_previous", format_double(ratio));
        pass = ratio >= 0.35 && ratio <= 0.65;
      }
      all_pass = all_pass && pass;
      report << format_record("variance_decay", "-", fields, pass) << "\n";
    }
  }

  {
    DiscreteInstance inst;
    inst.target_marginal = {0.25, 0.25, 0.25, 0.25};
    inst.target_conditional = Matrix::from_rows({{0.8, 0.2}, {0.3, 0.7}, {0.6, 0.4}, {0.1, 0.9}});
    inst.source_conditionals = {inst.target_conditional, inst.target_conditional,
                                Matrix::from_rows({{0.1, 0.9}, {0.9, 0.1}, {0.2, 0.8}, {0.7, 0.3}})};
    const auto r = majority_vote_check(inst, {});
    const bool pass = r.satisfied_fraction == 1.0;
    all_pass = all_pass && pass;
    report << format_record("majority_vote", inst.digest(),
                            {{"satisfied_fraction", format_double(r.satisfied_fraction)},
                             {"coverage", format_double(r.coverage)}},
                            pass)
           << "\n";
  }

  out.add("theory-report.txt", report.str());
  out.checks_passed = all_pass;
}

}  // namespace

ArtifactSet execute(const RunConfig& config) {
  ArtifactSet out;
  out.add("effective-config", write_config(config));
  switch (config.command) {
    case Command::generate: run_generate(config, out); break;
    case Command::pretrain: run_pretrain(config, out); break;
    case Command::adapt: run_adapt(config, out); break;
    case Command::evaluate: run_evaluate(config, out); break;
    case Command::theory: run_theory(config, out); break;
    case Command::export_embeddings: run_export(config, out); break;
  }
  return out;
}

int run(const RunConfig& config, std::ostream& log, std::ostream& err) {
  try {
    validate_paths(config);
    const ArtifactSet artifacts = execute(config);
    artifacts.commit(config.paths.out);
    log << "record=done command=" << to_string(config.command) << " out=" << config.paths.out.string()
        << " files=" << artifacts.files().size() << " checks=" << (artifacts.checks_passed ? "pass" : "fail")
        << "\n";
    return artifacts.checks_passed ? 0 : 1;
  } catch (const Error& e) {
    err << "record=error module=" << e.module() << " message=\"" << e.what() << "\"\n";
  } catch (const std::exception& e) {
    err << "record=error module=unknown message=\"" << e.what() << "\"\n";
  }
  return 2;
}

}  // namespace msfda::cli
