#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "msfda/data/dataset.hpp"
#include "msfda/losses/losses.hpp"
#include "msfda/numerics/optimizer.hpp"
#include "msfda/pseudo/pseudo_label.hpp"
#include "msfda/pseudo/source_model.hpp"

namespace msfda {

/// How the target set is split each outer iteration.
enum class SelectionMode {
  threshold,   // fused score > alpha(tau)
  oracle,      // correctly pseudo-labeled samples (needs hidden truth)
  unselective  // alpha = -infinity: every sample pseudo-labeled
};

std::string_view to_string(SelectionMode mode);
SelectionMode selection_mode_from_string(std::string_view name);

struct AdaptationConfig {
  std::size_t iterations = 20;
  std::size_t inner_epochs = 5;
  std::size_t batch_size = 32;
  SgdConfig extractor_optimizer{1e-2, 0.9, 1e-3};
  SgdConfig discriminator_optimizer{1e-3, 0.9, 1e-3};
  std::size_t discriminator_hidden = 32;
  LossWeights loss_weights;
  ScheduleParams schedule;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  SelectionMode selection = SelectionMode::threshold;
  bool ablate_alignment = false;
  bool ablate_denoise = false;
  /// Worker threads for the per-model updates; results do not depend on it.
  std::size_t workers = 1;

  void validate() const;

  friend bool operator==(const AdaptationConfig&, const AdaptationConfig&) = default;
};

struct ModelLosses {
  LossBreakdown initial;  // full D_l / D_u at iteration start, before updates
  LossBreakdown mean;     // average over the iteration's minibatches
  std::size_t batches = 0;
};

struct IterationMetrics {
  std::size_t iteration = 0;
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  double alpha = Partition::kNoThreshold;
  std::vector<ModelLosses> losses;  // one per model
  double ensemble_accuracy = Partition::kNoThreshold;  // NaN without truth
  double pseudo_label_accuracy = Partition::kNoThreshold;  // over D_l; NaN if empty or no truth
  std::size_t labeled_correct = 0;
  bool skipped_updates = false;  // empty D_l
};

struct AdaptationResult {
  std::vector<SourceModel> models;
  DomainWeights weights;
  std::vector<IterationMetrics> metrics;
  Partition final_partition;
  FusedLabels final_pseudo_labels;
};

struct EnsemblePrediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

/// fused = sum_j w_j h^j(x); label = argmax (ties to the smallest class).
EnsemblePrediction ensemble_predict(std::span<const SourceModel> models, const DomainWeights& w,
                                    std::span<const double> x);
std::vector<std::size_t> ensemble_predict(std::span<const SourceModel> models,
                                          const DomainWeights& w, const Matrix& inputs);

/// D_l = samples whose pseudo-label equals the hidden truth.
Partition oracle_partition(const HiddenTruth& truth, const FusedLabels& fused);

/// Fraction of samples where the ensemble prediction equals the truth.
double evaluate(std::span<const SourceModel> models, const DomainWeights& w,
                const Dataset& dataset, const HiddenTruth& truth);

/// Runs the selective pseudo-labeling adaptation loop. `truth` is used only
/// for evaluation metrics and by the oracle selection mode.
AdaptationResult adapt(std::span<const SourceModel> models, const Dataset& target,
                       const AdaptationConfig& config, const HiddenTruth* truth = nullptr);

/// Computes the fused pseudo-labels that seed iteration 1 (bootstrap
/// prototypes on the given models). Exposed for inspection and tests.
FusedLabels initial_pseudo_labels(std::span<const SourceModel> models, const Dataset& target,
                                  const DomainWeights& weights, const AdaptationConfig& config);

// Line-delimited metric records, `key=value` pairs separated by spaces.
std::string format_metrics(const IterationMetrics& m);
std::string format_summary(const AdaptationResult& result, const HiddenTruth* truth,
                           std::span<const SourceModel> models_in, const Dataset& target);

/// CSV: index,subset,pseudo_label,fused_score,alpha
void write_partition_csv(std::ostream& out, const Partition& partition);
Partition read_partition_csv(std::istream& in);

}  // namespace msfda
