#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "hsia/errors.hpp"
#include "hsia/model.hpp"
#include "hsia/patches.hpp"
#include "hsia/random.hpp"

namespace hsia {

struct TrainConfig {
  double learning_rate = 0.02;
  std::size_t epochs = 8;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;
  double l2_weight_decay = 0.0;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ArgumentError("learning_rate must be a finite nonnegative value");
    }
    if (epochs == 0) throw ArgumentError("epochs must be positive");
    if (batch_size == 0) throw ArgumentError("batch_size must be positive");
    if (!(l2_weight_decay >= 0.0)) throw ArgumentError("l2_weight_decay must be nonnegative");
  }
};

struct TrainResult {
  PatchClassifier model;
  // Entry 0 is the mean loss over the set before training; entry e is the
  // mean of the per-sample losses seen during epoch e.
  std::vector<double> loss_history;
};

inline double mean_loss(const PatchClassifier& model, const PatchSet& set) {
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) total += model.loss_and_input_gradient(set.patches[i], set.labels[i]).loss;
  return total / static_cast<double>(set.size());
}

/// Minibatch SGD on mean cross-entropy plus optional L2 on weights. Shuffling
/// is seeded; gradients accumulate in sample order, so runs are bit-identical.
inline TrainResult train(PatchClassifier model, const PatchSet& set, const TrainConfig& cfg) {
  cfg.validate();
  if (set.empty()) throw ArgumentError("cannot train on an empty patch set");
  for (ClassId l : set.labels) {
    if (l >= model.num_classes()) throw ArgumentError("training label " + std::to_string(l) + " out of range");
  }

  TrainResult result;
  result.loss_history.push_back(mean_loss(model, set));
  if (!std::isfinite(result.loss_history.back())) throw TrainingError("initial loss is not finite", 0);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> sample_loss(set.size());
  auto& layers = model.layers();
  const float lr = static_cast<float>(cfg.learning_rate);
  const float decay = static_cast<float>(cfg.l2_weight_decay);

  std::vector<LayerGradients<float>> acc(layers.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (!has_parameters(layers[l].spec)) continue;
        acc[l].weight = Tensor(layers[l].weight.shape());
        acc[l].bias = Tensor(layers[l].bias.shape());
      }
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        auto g = model.loss_and_gradients(set.patches[idx], set.labels[idx]);
        sample_loss[idx] = g.loss;
        for (std::size_t l = 0; l < layers.size(); ++l) {
          if (!has_parameters(layers[l].spec)) continue;
          for (std::size_t i = 0; i < acc[l].weight.size(); ++i) acc[l].weight[i] += g.layers[l].weight[i];
          for (std::size_t i = 0; i < acc[l].bias.size(); ++i) acc[l].bias[i] += g.layers[l].bias[i];
        }
      }
      const float scale = lr / static_cast<float>(end - start);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (!has_parameters(layers[l].spec)) continue;
        auto& w = layers[l].weight;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= scale * acc[l].weight[i] + lr * decay * w[i];
        auto& bias = layers[l].bias;
        for (std::size_t i = 0; i < bias.size(); ++i) bias[i] -= scale * acc[l].bias[i];
      }
    }
    const double epoch_loss =
        std::accumulate(sample_loss.begin(), sample_loss.end(), 0.0) / static_cast<double>(set.size());
    if (!std::isfinite(epoch_loss) || !model.parameters_finite()) {
      throw TrainingError("training diverged: loss or parameters are no longer finite", epoch);
    }
    result.loss_history.push_back(epoch_loss);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace hsia
