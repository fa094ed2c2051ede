#include "msfda/data/pretrain.hpp"

#include <algorithm>
#include <numeric>

#include "msfda/error.hpp"
#include "msfda/losses/losses.hpp"
#include "msfda/numerics/rng.hpp"

namespace msfda {

void PretrainConfig::validate() const {
  if (batch_size == 0) throw ValidationError("data", "pretrain batch size must be >= 1");
  optimizer.validate();
}

SourceModel pretrain_source(const Dataset& dataset, const Architecture& arch,
                            const PretrainConfig& config, std::uint64_t seed) {
  if (!dataset.labeled())
    throw ValidationError("data", "pretraining needs a labeled dataset ('" + dataset.domain + "')");
  dataset.validate();
  if (dataset.num_classes < 2)
    throw ValidationError("data", "pretraining needs at least two classes ('" + dataset.domain + "')");
  config.validate();

  Rng rng = make_rng(seed, "pretrain:" + dataset.domain);
  const std::size_t extractor_dims[] = {dataset.dim(), arch.hidden, arch.feature_dim};
  const std::size_t classifier_dims[] = {arch.feature_dim, dataset.num_classes};
  SourceModel model{make_mlp(extractor_dims, rng), make_mlp(classifier_dims, rng), dataset.domain};

  OptimizerState extractor_state(config.optimizer, model.extractor);
  OptimizerState classifier_state(config.optimizer, model.classifier);
  const auto& labels = *dataset.labels;
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      std::vector<std::size_t> batch_labels;
      for (std::size_t i : idx) batch_labels.push_back(labels[i]);

      ad::Tape tape;
      auto f = bind(tape, model.extractor, true);
      auto g = bind(tape, model.classifier, true);
      auto loss = cross_entropy(class_probabilities(f, g, tape.constant(dataset.features.gather_rows(idx))),
                                batch_labels);
      tape.backward(loss);
      sgd_step(model.extractor, collect_gradients(tape, f), extractor_state);
      sgd_step(model.classifier, collect_gradients(tape, g), classifier_state);
    }
  }
  return model;
}

double accuracy(const SourceModel& model, const Matrix& inputs, std::span<const std::size_t> labels) {
  if (inputs.rows() == 0) return 0.0;
  const Matrix probs = model.predict(inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) correct += argmax(probs.row(i)) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

}  // namespace msfda
