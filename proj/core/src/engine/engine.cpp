#include "msfda/engine/engine.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "msfda/data/csv.hpp"
#include "msfda/error.hpp"
#include "msfda/numerics/rng.hpp"

namespace msfda {

std::string_view to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::threshold: return "threshold";
    case SelectionMode::oracle: return "oracle";
    case SelectionMode::unselective: return "unselective";
  }
  return "threshold";
}

SelectionMode selection_mode_from_string(std::string_view name) {
  if (name == "threshold") return SelectionMode::threshold;
  if (name == "oracle") return SelectionMode::oracle;
  if (name == "unselective") return SelectionMode::unselective;
  throw ValidationError("engine", "unknown selection mode '" + std::string(name) + "'");
}

void AdaptationConfig::validate() const {
  if (batch_size == 0) throw ValidationError("engine", "batch size must be >= 1");
  if (workers == 0) throw ValidationError("engine", "workers must be >= 1");
  if (discriminator_hidden == 0) throw ValidationError("engine", "discriminator width must be >= 1");
  if (!(temperature > 0.0)) throw ValidationError("engine", "temperature must be positive");
  extractor_optimizer.validate();
  discriminator_optimizer.validate();
  loss_weights.validate();
  schedule.validate();
}

EnsemblePrediction ensemble_predict(std::span<const SourceModel> models, const DomainWeights& w,
                                    std::span<const double> x) {
  if (models.empty() || models.size() != w.size())
    throw ShapeError("ensemble: one weight per model required");
  const Matrix input = Matrix::row_vector(x);
  EnsemblePrediction out{0, std::vector<double>(models.front().num_classes(), 0.0)};
  for (std::size_t j = 0; j < models.size(); ++j) {
    if (models[j].num_classes() != out.probabilities.size()) throw ShapeError("ensemble: class counts differ");
    const Matrix h = models[j].predict(input);
    for (std::size_t k = 0; k < out.probabilities.size(); ++k) out.probabilities[k] += w[j] * h(0, k);
  }
  out.label = argmax(out.probabilities);
  return out;
}

std::vector<std::size_t> ensemble_predict(std::span<const SourceModel> models,
                                          const DomainWeights& w, const Matrix& inputs) {
  if (models.empty() || models.size() != w.size())
    throw ShapeError("ensemble: one weight per model required");
  const std::size_t classes = models.front().num_classes();
  Matrix fused(inputs.rows(), classes);
  for (std::size_t j = 0; j < models.size(); ++j) {
    if (models[j].num_classes() != classes) throw ShapeError("ensemble: class counts differ");
    const Matrix h = models[j].predict(inputs);
    auto dst = fused.values();
    auto src = h.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w[j] * src[k];
  }
  std::vector<std::size_t> labels(inputs.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = argmax(fused.row(i));
  return labels;
}

Partition oracle_partition(const HiddenTruth& truth, const FusedLabels& fused) {
  if (truth.labels.size() != fused.labels.size())
    throw ValidationError("engine", "oracle partition needs hidden truth for every target sample");
  Partition out;
  out.scores = fused.scores;
  out.fused_labels = fused.labels;
  for (std::size_t i = 0; i < fused.labels.size(); ++i) {
    if (fused.labels[i] == truth.labels[i]) {
      out.labeled.push_back(i);
      out.pseudo_labels.push_back(fused.labels[i]);
    } else {
      out.unlabeled.push_back(i);
    }
  }
  return out;
}

double evaluate(std::span<const SourceModel> models, const DomainWeights& w,
                const Dataset& dataset, const HiddenTruth& truth) {
  if (truth.labels.size() != dataset.size())
    throw ValidationError("engine", "evaluation needs hidden truth for every sample");
  const auto predicted = ensemble_predict(models, w, dataset.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == truth.labels[i];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

namespace {

// Per-model adaptation state. Each model owns its random stream, so the
// outcome does not depend on the order in which models are updated.
struct ModelState {
  SourceModel model;
  Prototypes prototypes;
  Discriminator discriminator;
  OptimizerState extractor_opt;
  OptimizerState discriminator_opt;
  Rng rng;
};

Matrix confidence_for(const ModelState& s, const Dataset& target, const AdaptationConfig& config) {
  const Matrix h = s.model.predict(target.features);
  if (config.ablate_denoise) {
    return confidence_scores(h, Matrix(h.rows(), h.cols(), 1.0 / static_cast<double>(h.cols())));
  }
  if (!s.prototypes.any_valid()) return h;
  return confidence_scores(h, prototype_distribution(s.model.features(target.features), s.prototypes,
                                                     config.temperature));
}

FusedLabels fuse_all(std::span<const ModelState> states, const Dataset& target,
                     const DomainWeights& weights, const AdaptationConfig& config) {
  std::vector<Matrix> confidences;
  for (const auto& s : states) confidences.push_back(confidence_for(s, target, config));
  return fuse_pseudo_labels(confidences, weights);
}

Partition select(const FusedLabels& fused, std::size_t tau, const AdaptationConfig& config,
                 const HiddenTruth* truth) {
  switch (config.selection) {
    case SelectionMode::oracle: return oracle_partition(*truth, fused);
    case SelectionMode::unselective: return partition(fused, -std::numeric_limits<double>::infinity());
    case SelectionMode::threshold: break;
  }
  return partition(fused, alpha_schedule(config.schedule, tau, fused.scores));
}

LossBreakdown full_set_losses(const ModelState& s, const Dataset& target, const Partition& part,
                              const AdaptationConfig& config, bool align) {
  AdaptationBatch batch{target.features.gather_rows(part.labeled), part.pseudo_labels,
                        align ? target.features.gather_rows(part.unlabeled) : Matrix(0, target.dim())};
  LossWeights weights = config.loss_weights;
  if (!align) weights.adversarial = 0.0;
  return joint_feature_loss(s.model, s.discriminator, batch, weights);
}

void accumulate(LossBreakdown& into, const LossBreakdown& add) {
  into.cross_entropy += add.cross_entropy;
  into.info_max += add.info_max;
  into.adversarial += add.adversarial;
  into.joint += add.joint;
}

ModelLosses train_model(ModelState& s, const Dataset& target, const Partition& part,
                        const AdaptationConfig& config) {
  const bool align = !config.ablate_alignment && !part.unlabeled.empty();
  ModelLosses losses;
  losses.initial = full_set_losses(s, target, part, config, align);

  LossWeights weights = config.loss_weights;
  if (!align) weights.adversarial = 0.0;

  const std::size_t n_l = part.labeled.size();
  std::vector<std::size_t> order(n_l);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> u_stream = part.unlabeled;
  std::size_t u_cursor = u_stream.size();

  for (std::size_t epoch = 0; epoch < config.inner_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), s.rng);
    for (std::size_t start = 0; start < n_l; start += config.batch_size) {
      const std::size_t stop = std::min(n_l, start + config.batch_size);
      std::vector<std::size_t> rows_l, labels_l, rows_u;
      for (std::size_t p = start; p < stop; ++p) {
        rows_l.push_back(part.labeled[order[p]]);
        labels_l.push_back(part.pseudo_labels[order[p]]);
      }
      if (align) {
        // Equal-sized draw from D_u; the stream is reshuffled whenever it runs
        // out, so a smaller D_u is resampled.
        while (rows_u.size() < rows_l.size()) {
          if (u_cursor == u_stream.size()) {
            std::shuffle(u_stream.begin(), u_stream.end(), s.rng);
            u_cursor = 0;
          }
          rows_u.push_back(u_stream[u_cursor++]);
        }
      }
      AdaptationBatch batch{target.features.gather_rows(rows_l), std::move(labels_l),
                            target.features.gather_rows(rows_u)};
      if (!align) batch.unlabeled_inputs = Matrix(0, target.dim());

      if (align) {
        ad::Tape tape;
        auto f = bind(tape, s.model.extractor, false);
        auto d = bind(tape, s.discriminator.net, true);
        auto loss = adversarial(d, forward(f, tape.constant(batch.labeled_inputs)),
                                forward(f, tape.constant(batch.unlabeled_inputs)));
        tape.backward(loss);
        sgd_ascent_step(s.discriminator.net, collect_gradients(tape, d), s.discriminator_opt);
      }

      ad::Tape tape;
      auto f = bind(tape, s.model.extractor, true);
      auto g = bind(tape, s.model.classifier, false);
      auto d = bind(tape, s.discriminator.net, false);
      LossBreakdown parts;
      auto loss = joint_feature_loss(f, g, d, batch, weights, &parts);
      tape.backward(loss);
      sgd_step(s.model.extractor, collect_gradients(tape, f), s.extractor_opt);
      accumulate(losses.mean, parts);
      ++losses.batches;
    }
  }
  if (losses.batches > 0) {
    const double inv = 1.0 / static_cast<double>(losses.batches);
    losses.mean.cross_entropy *= inv;
    losses.mean.info_max *= inv;
    losses.mean.adversarial *= inv;
    losses.mean.joint *= inv;
  }
  return losses;
}

void validate_inputs(std::span<const SourceModel> models, const Dataset& target,
                     const AdaptationConfig& config, const HiddenTruth* truth) {
  config.validate();
  target.validate();
  if (models.empty()) throw ValidationError("engine", "adaptation needs at least one source model");
  for (const auto& m : models) {
    m.validate();
    if (m.num_classes() != models.front().num_classes())
      throw ValidationError("engine", "source models disagree on the class count");
    if (m.input_dim() != target.dim())
      throw ValidationError("engine", "model '" + m.domain + "' expects input width " +
                                          std::to_string(m.input_dim()) + ", target has " +
                                          std::to_string(target.dim()));
  }
  if (truth && truth->labels.size() != target.size())
    throw ValidationError("engine", "hidden truth length differs from the target size");
  if (config.selection == SelectionMode::oracle && !truth)
    throw ValidationError("engine", "oracle selection needs hidden truth");
}

std::vector<ModelState> initial_states(std::span<const SourceModel> models, const Dataset& target,
                                       const AdaptationConfig& config) {
  std::vector<ModelState> states;
  for (std::size_t j = 0; j < models.size(); ++j) {
    Rng rng = make_rng(config.seed, "adapt:" + std::to_string(j) + ":" + models[j].domain);
    Discriminator disc = make_discriminator(models[j].feature_dim(), config.discriminator_hidden, rng);
    states.push_back(ModelState{models[j], bootstrap_prototypes(models[j], target), disc,
                                OptimizerState(config.extractor_optimizer, models[j].extractor),
                                OptimizerState(config.discriminator_optimizer, disc.net), std::move(rng)});
  }
  return states;
}

}  // namespace

FusedLabels initial_pseudo_labels(std::span<const SourceModel> models, const Dataset& target,
                                  const DomainWeights& weights, const AdaptationConfig& config) {
  return fuse_all(initial_states(models, target, config), target, weights, config);
}

AdaptationResult adapt(std::span<const SourceModel> models, const Dataset& target,
                       const AdaptationConfig& config, const HiddenTruth* truth) {
  validate_inputs(models, target, config, truth);

  AdaptationResult result;
  result.weights = domain_weights(models, target);
  std::vector<ModelState> states = initial_states(models, target, config);
  FusedLabels fused = fuse_all(states, target, result.weights, config);

  for (std::size_t tau = 1; tau <= config.iterations; ++tau) {
    const Partition part = select(fused, tau, config, truth);
    IterationMetrics m;
    m.iteration = tau;
    m.labeled = part.labeled.size();
    m.unlabeled = part.unlabeled.size();
    m.alpha = part.alpha;
    m.losses.resize(states.size());
    if (truth) {
      for (std::size_t p = 0; p < part.labeled.size(); ++p)
        m.labeled_correct += part.pseudo_labels[p] == truth->labels[part.labeled[p]];
      if (!part.labeled.empty())
        m.pseudo_label_accuracy = static_cast<double>(m.labeled_correct) / static_cast<double>(m.labeled);
    }

    if (part.labeled.empty()) {
      m.skipped_updates = true;
    } else if (config.workers > 1 && states.size() > 1) {
      std::vector<std::future<ModelLosses>> tasks;
      for (auto& s : states)
        tasks.push_back(std::async(std::launch::async, [&s, &target, &part, &config] {
          return train_model(s, target, part, config);
        }));
      for (std::size_t j = 0; j < tasks.size(); ++j) m.losses[j] = tasks[j].get();
    } else {
      for (std::size_t j = 0; j < states.size(); ++j) m.losses[j] = train_model(states[j], target, part, config);
    }

    // Barrier: refresh prototypes and fused pseudo-labels with the updated models.
    for (auto& s : states) {
      s.prototypes = part.labeled.empty()
                         ? bootstrap_prototypes(s.model, target)
                         : compute_prototypes(s.model, target, part, s.prototypes);
    }
    fused = fuse_all(states, target, result.weights, config);

    if (truth) {
      std::vector<SourceModel> current;
      for (const auto& s : states) current.push_back(s.model);
      m.ensemble_accuracy = evaluate(current, result.weights, target, *truth);
    }
    result.metrics.push_back(std::move(m));
  }

  result.final_partition = select(fused, config.iterations, config, truth);
  result.final_pseudo_labels = std::move(fused);
  for (auto& s : states) result.models.push_back(std::move(s.model));
  return result;
}

namespace {

void put_loss(std::ostringstream& out, const std::string& prefix, const LossBreakdown& l) {
  out << ' ' << prefix << ".ce=" << format_double(l.cross_entropy) << ' ' << prefix
      << ".im=" << format_double(l.info_max) << ' ' << prefix << ".adv=" << format_double(l.adversarial)
      << ' ' << prefix << ".joint=" << format_double(l.joint);
}

}  // namespace

std::string format_metrics(const IterationMetrics& m) {
  std::ostringstream out;
  out << "record=iteration iteration=" << m.iteration << " labeled=" << m.labeled
      << " unlabeled=" << m.unlabeled << " alpha=" << format_double(m.alpha)
      << " ensemble_accuracy=" << format_double(m.ensemble_accuracy)
      << " pseudo_label_accuracy=" << format_double(m.pseudo_label_accuracy)
      << " labeled_correct=" << m.labeled_correct;
  if (m.skipped_updates) out << " warning=empty_labeled_set";
  for (std::size_t j = 0; j < m.losses.size(); ++j) {
    const std::string prefix = "model" + std::to_string(j + 1);
    put_loss(out, prefix + ".initial", m.losses[j].initial);
    put_loss(out, prefix + ".mean", m.losses[j].mean);
    out << ' ' << prefix << ".batches=" << m.losses[j].batches;
  }
  return out.str();
}

std::string format_summary(const AdaptationResult& result, const HiddenTruth* truth,
                           std::span<const SourceModel> models_in, const Dataset& target) {
  std::ostringstream out;
  out << "record=summary iterations=" << result.metrics.size() << " models=" << result.models.size()
      << " weights=";
  for (std::size_t j = 0; j < result.weights.size(); ++j)
    out << (j ? "," : "") << format_double(result.weights[j]);
  out << " final_labeled=" << result.final_partition.labeled.size()
      << " final_unlabeled=" << result.final_partition.unlabeled.size();
  if (truth) {
    out << " source_ensemble_accuracy=" << format_double(evaluate(models_in, result.weights, target, *truth))
        << " final_accuracy=" << format_double(evaluate(result.models, result.weights, target, *truth));
  }
  return out.str();
}

void write_partition_csv(std::ostream& out, const Partition& partition) {
  const std::size_t n = partition.size();
  std::vector<char> labeled(n, 0);
  for (std::size_t i : partition.labeled) labeled[i] = 1;
  out << "index,subset,pseudo_label,fused_score,alpha\n";
  const std::string alpha = std::isnan(partition.alpha) ? "na" : format_double(partition.alpha);
  for (std::size_t i = 0; i < n; ++i) {
    out << i << ',' << (labeled[i] ? 'L' : 'U') << ',' << partition.fused_labels[i] + 1 << ','
        << format_double(partition.scores[i]) << ',' << alpha << '\n';
  }
}

Partition read_partition_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "index,subset,pseudo_label,fused_score,alpha")
    throw ParseError("engine", "partition CSV header mismatch");
  Partition out;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string index, subset, label, score, alpha;
    if (!std::getline(row, index, ',') || !std::getline(row, subset, ',') ||
        !std::getline(row, label, ',') || !std::getline(row, score, ',') || !std::getline(row, alpha))
      throw ParseError("engine", "partition CSV row " + std::to_string(expected + 1) + " is incomplete");
    try {
      if (std::stoul(index) != expected) throw ParseError("engine", "partition CSV indices must be 0..n-1 in order");
      const std::size_t k = std::stoul(label);
      if (k == 0) throw ParseError("engine", "partition CSV labels are 1-based");
      out.fused_labels.push_back(k - 1);
      out.scores.push_back(std::stod(score));
      out.alpha = alpha == "na" ? Partition::kNoThreshold : std::stod(alpha);
    } catch (const std::logic_error&) {
      throw ParseError("engine", "partition CSV row " + std::to_string(expected + 1) + " is malformed");
    }
    if (subset == "L") {
      out.labeled.push_back(expected);
      out.pseudo_labels.push_back(out.fused_labels.back());
    } else if (subset == "U") {
      out.unlabeled.push_back(expected);
    } else {
      throw ParseError("engine", "partition CSV subset must be L or U");
    }
    ++expected;
  }
  return out;
}

}  // namespace msfda
