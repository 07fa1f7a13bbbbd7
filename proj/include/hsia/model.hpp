#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hsia/errors.hpp"
#include "hsia/layers.hpp"
#include "hsia/random.hpp"
#include "hsia/tensor.hpp"

namespace hsia {

using ClassId = std::uint16_t;

/// Shape of the patches a classifier accepts: [components, height, width].
struct ModelContract {
  std::size_t components = 20;
  std::size_t height = 11;
  std::size_t width = 11;

  Shape patch_shape() const { return Shape{components, height, width}; }
  friend bool operator==(const ModelContract&, const ModelContract&) = default;
};

template <typename T>
struct ForwardResult {
  BasicTensor<T> logits;
  BasicTensor<T> probabilities;
};

template <typename T>
struct FullGradients {
  T loss{};
  BasicTensor<T> input;
  std::vector<LayerGradients<T>> layers;  // one entry per layer; empty tensors for parameter-free layers
};

/// Layer stack mapping a [K, h, w] patch to C logits.
template <typename T>
class BasicPatchClassifier {
 public:
  BasicPatchClassifier() = default;
  BasicPatchClassifier(ModelContract contract, std::size_t num_classes, std::vector<Layer<T>> layers)
      : contract_(contract), num_classes_(num_classes), layers_(std::move(layers)) {
    validate();
  }

  const ModelContract& contract() const noexcept { return contract_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  const std::vector<Layer<T>>& layers() const noexcept { return layers_; }
  std::vector<Layer<T>>& layers() noexcept { return layers_; }

  /// Checks that the layer chain maps the contract shape to [num_classes].
  void validate() const {
    if (num_classes_ < 2) throw ConfigError("classifier needs at least two classes");
    Shape shape = contract_.patch_shape();
    for (const auto& layer : layers_) {
      shape = output_shape(layer.spec, shape);
      if (has_parameters(layer.spec)) {
        auto [w, b] = parameter_shapes(layer.spec);
        if (layer.weight.shape() != w || layer.bias.shape() != b) {
          throw ConfigError(layer_name(layer.spec) + " parameter shapes do not match its spec");
        }
      }
    }
    if (shape != Shape{num_classes_}) {
      throw ConfigError("layer chain ends in " + shape.to_string() + ", expected [" + std::to_string(num_classes_) +
                        "]");
    }
  }

  ForwardResult<T> forward(const BasicTensor<T>& patch) const {
    check_patch(patch);
    BasicTensor<T> x = patch;
    for (const auto& layer : layers_) x = layer_forward(layer, x);
    auto probs = softmax(x);
    return {std::move(x), std::move(probs)};
  }

  ClassId predict(const BasicTensor<T>& patch) const {
    auto logits = forward(patch).logits;
    return static_cast<ClassId>(std::max_element(logits.values().begin(), logits.values().end()) -
                                logits.values().begin());
  }

  /// Cross-entropy of the forward logits against `label`, and its gradient
  /// with respect to the input patch.
  LossAndGradient<T> loss_and_input_gradient(const BasicTensor<T>& patch, std::size_t label) const {
    auto full = backprop(patch, label, false);
    return {full.loss, std::move(full.input)};
  }

  /// Loss plus gradients for the input and every parameter tensor.
  FullGradients<T> loss_and_gradients(const BasicTensor<T>& patch, std::size_t label) const {
    return backprop(patch, label, true);
  }

  template <typename U>
  BasicPatchClassifier<U> cast() const {
    std::vector<Layer<U>> layers;
    for (const auto& l : layers_) layers.push_back(l.template cast<U>());
    return BasicPatchClassifier<U>(contract_, num_classes_, std::move(layers));
  }

  bool parameters_finite() const {
    return std::all_of(layers_.begin(), layers_.end(),
                       [](const Layer<T>& l) { return l.weight.all_finite() && l.bias.all_finite(); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  friend bool operator==(const BasicPatchClassifier& a, const BasicPatchClassifier& b) {
    if (a.contract_ != b.contract_ || a.num_classes_ != b.num_classes_ || a.layers_.size() != b.layers_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      const auto &x = a.layers_[i], &y = b.layers_[i];
      if (!(x.spec == y.spec) || !(x.weight == y.weight) || !(x.bias == y.bias)) return false;
    }
    return true;
  }

 private:
  void check_patch(const BasicTensor<T>& patch) const {
    if (patch.shape() != contract_.patch_shape()) {
      throw ConfigError("patch shape " + patch.shape().to_string() + " does not match model contract " +
                        contract_.patch_shape().to_string());
    }
  }

  FullGradients<T> backprop(const BasicTensor<T>& patch, std::size_t label, bool with_params) const {
    check_patch(patch);
    if (label >= num_classes_) {
      throw ArgumentError("label " + std::to_string(label) + " out of range for " + std::to_string(num_classes_) +
                          " classes");
    }
    std::vector<LayerCache<T>> caches(layers_.size());
    BasicTensor<T> x = patch;
    for (std::size_t i = 0; i < layers_.size(); ++i) x = layer_forward(layers_[i], x, &caches[i]);
    auto ce = softmax_cross_entropy(x, label);

    FullGradients<T> out;
    out.loss = ce.loss;
    out.layers.resize(with_params ? layers_.size() : 0);
    BasicTensor<T> grad = std::move(ce.gradient);
    for (std::size_t i = layers_.size(); i-- > 0;) {
      grad = layer_backward(layers_[i], caches[i], grad, with_params ? &out.layers[i] : nullptr);
    }
    out.input = std::move(grad);
    return out;
  }

  ModelContract contract_;
  std::size_t num_classes_ = 0;
  std::vector<Layer<T>> layers_;
};

using PatchClassifier = BasicPatchClassifier<float>;

/// Conv(K->16, 3x3) -> ReLU -> Conv(16->32, 3x3) -> ReLU -> Flatten ->
/// Dense(->64) -> ReLU -> Dense(->C), all parameters zero.
inline std::vector<LayerSpec> reference_architecture(const ModelContract& contract, std::size_t num_classes) {
  if (contract.height < 5 || contract.width < 5) {
    throw ConfigError("reference architecture needs patches of at least 5x5");
  }
  const std::size_t flat = 32 * (contract.height - 4) * (contract.width - 4);
  return {Conv2DSpec{contract.components, 16, 3, 3, 1}, ReluSpec{}, Conv2DSpec{16, 32, 3, 3, 1}, ReluSpec{},
          FlattenSpec{}, DenseSpec{flat, 64}, ReluSpec{}, DenseSpec{64, num_classes}};
}

inline PatchClassifier make_classifier(const ModelContract& contract, std::size_t num_classes,
                                       const std::vector<LayerSpec>& specs) {
  std::vector<Layer<float>> layers;
  for (const auto& s : specs) layers.push_back(Layer<float>::make(s));
  return PatchClassifier(contract, num_classes, std::move(layers));
}

/// Glorot-uniform weights in [-a, a], a = sqrt(6 / (fan_in + fan_out)); zero biases.
inline void initialize_parameters(PatchClassifier& model, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& layer : model.layers()) {
    if (!has_parameters(layer.spec)) continue;
    std::size_t fan_in, fan_out;
    if (auto c = std::get_if<Conv2DSpec>(&layer.spec)) {
      fan_in = c->in_channels * c->kernel_h * c->kernel_w;
      fan_out = c->out_channels * c->kernel_h * c->kernel_w;
    } else {
      const auto& d = std::get<DenseSpec>(layer.spec);
      fan_in = d.in_features;
      fan_out = d.out_features;
    }
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (float& w : layer.weight.values()) w = static_cast<float>(rng.uniform(-a, a));
    layer.bias.fill(0.0f);
  }
}

inline PatchClassifier make_reference_classifier(const ModelContract& contract, std::size_t num_classes,
                                                 std::uint64_t seed) {
  auto model = make_classifier(contract, num_classes, reference_architecture(contract, num_classes));
  initialize_parameters(model, seed);
  return model;
}

/// Reference architecture with every parameter zero: uniform predictions and a
/// zero input gradient.
inline PatchClassifier make_zero_classifier(const ModelContract& contract, std::size_t num_classes) {
  return make_classifier(contract, num_classes, reference_architecture(contract, num_classes));
}

}  // namespace hsia
