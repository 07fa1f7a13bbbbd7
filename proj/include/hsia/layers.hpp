#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hsia/errors.hpp"
#include "hsia/tensor.hpp"

namespace hsia {

// Layer hyperparameters. Inputs are single samples: Conv2D and MaxPool2D take
// [C, H, W], Flatten produces [N], Dense maps [in] to [out]. Padding is valid.

struct Conv2DSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  friend bool operator==(const Conv2DSpec&, const Conv2DSpec&) = default;
};

struct ReluSpec {
  friend bool operator==(const ReluSpec&, const ReluSpec&) = default;
};

struct MaxPool2DSpec {
  std::size_t kernel = 2;
  std::size_t stride = 2;
  friend bool operator==(const MaxPool2DSpec&, const MaxPool2DSpec&) = default;
};

struct FlattenSpec {
  friend bool operator==(const FlattenSpec&, const FlattenSpec&) = default;
};

struct DenseSpec {
  std::size_t in_features = 1;
  std::size_t out_features = 1;
  friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};

using LayerSpec = std::variant<Conv2DSpec, ReluSpec, MaxPool2DSpec, FlattenSpec, DenseSpec>;

inline std::string layer_name(const LayerSpec& spec) {
  constexpr const char* names[] = {"Conv2D", "ReLU", "MaxPool2D", "Flatten", "Dense"};
  return names[spec.index()];
}

inline bool has_parameters(const LayerSpec& spec) {
  return std::holds_alternative<Conv2DSpec>(spec) || std::holds_alternative<DenseSpec>(spec);
}

/// Output shape of `spec` applied to `input`; throws ConfigError naming both
/// the expected and the actual input shape when they are incompatible.
inline Shape output_shape(const LayerSpec& spec, const Shape& input) {
  auto mismatch = [&](const std::string& expected) {
    return ConfigError(layer_name(spec) + " expects input " + expected + ", got " + input.to_string());
  };
  return std::visit(
      [&](const auto& s) -> Shape {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Conv2DSpec>) {
          const std::string expected = "[" + std::to_string(s.in_channels) + ",>=" + std::to_string(s.kernel_h) +
                                       ",>=" + std::to_string(s.kernel_w) + "]";
          if (input.rank() != 3 || input[0] != s.in_channels || input[1] < s.kernel_h || input[2] < s.kernel_w) {
            throw mismatch(expected);
          }
          if (s.stride == 0) throw ConfigError("Conv2D stride must be positive");
          return Shape{s.out_channels, (input[1] - s.kernel_h) / s.stride + 1, (input[2] - s.kernel_w) / s.stride + 1};
        } else if constexpr (std::is_same_v<S, ReluSpec>) {
          return input;
        } else if constexpr (std::is_same_v<S, MaxPool2DSpec>) {
          if (input.rank() != 3 || input[1] < s.kernel || input[2] < s.kernel) {
            throw mismatch("[C,>=" + std::to_string(s.kernel) + ",>=" + std::to_string(s.kernel) + "]");
          }
          if (s.stride == 0) throw ConfigError("MaxPool2D stride must be positive");
          return Shape{input[0], (input[1] - s.kernel) / s.stride + 1, (input[2] - s.kernel) / s.stride + 1};
        } else if constexpr (std::is_same_v<S, FlattenSpec>) {
          return Shape{input.count()};
        } else {
          if (input.rank() != 1 || input[0] != s.in_features) {
            throw mismatch("[" + std::to_string(s.in_features) + "]");
          }
          return Shape{s.out_features};
        }
      },
      spec);
}

/// Parameter shapes (weight, bias) for layers that have them.
inline std::pair<Shape, Shape> parameter_shapes(const LayerSpec& spec) {
  if (auto c = std::get_if<Conv2DSpec>(&spec)) {
    return {Shape{c->out_channels, c->in_channels, c->kernel_h, c->kernel_w}, Shape{c->out_channels}};
  }
  if (auto d = std::get_if<DenseSpec>(&spec)) {
    return {Shape{d->out_features, d->in_features}, Shape{d->out_features}};
  }
  throw UsageError(layer_name(spec) + " has no parameters");
}

namespace detail {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<Matrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const Matrix<T>>;
template <typename T>
using VectorMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVectorMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

// Rows index (in_channel, ky, kx); columns index output pixels.
template <typename T>
Matrix<T> im2col(const BasicTensor<T>& input, const Conv2DSpec& c, const Shape& out_shape) {
  const std::size_t ih = input.dim(1), iw = input.dim(2);
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  Matrix<T> cols(c.in_channels * c.kernel_h * c.kernel_w, oh * ow);
  for (std::size_t ic = 0; ic < c.in_channels; ++ic)
    for (std::size_t ky = 0; ky < c.kernel_h; ++ky)
      for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
        T* row = cols.data() + ((ic * c.kernel_h + ky) * c.kernel_w + kx) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t x = 0; x < ow; ++x)
            row[y * ow + x] = input[(ic * ih + y * c.stride + ky) * iw + x * c.stride + kx];
      }
  return cols;
}

template <typename T>
void col2im_add(const Matrix<T>& cols, const Conv2DSpec& c, const Shape& out_shape, BasicTensor<T>& grad_in) {
  const std::size_t ih = grad_in.dim(1), iw = grad_in.dim(2);
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  for (std::size_t ic = 0; ic < c.in_channels; ++ic)
    for (std::size_t ky = 0; ky < c.kernel_h; ++ky)
      for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
        const T* row = cols.data() + ((ic * c.kernel_h + ky) * c.kernel_w + kx) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t x = 0; x < ow; ++x)
            grad_in[(ic * ih + y * c.stride + ky) * iw + x * c.stride + kx] += row[y * ow + x];
      }
}

}  // namespace detail

template <typename T>
struct Layer {
  LayerSpec spec;
  BasicTensor<T> weight;  // empty for parameter-free layers
  BasicTensor<T> bias;

  static Layer make(LayerSpec spec) {
    Layer layer{spec, {}, {}};
    if (has_parameters(spec)) {
      auto [w, b] = parameter_shapes(spec);
      layer.weight = BasicTensor<T>(w);
      layer.bias = BasicTensor<T>(b);
    }
    return layer;
  }

  template <typename U>
  Layer<U> cast() const {
    return Layer<U>{spec, weight.template cast<U>(), bias.template cast<U>()};
  }
};

template <typename T>
struct LayerCache {
  BasicTensor<T> input;
  std::vector<std::uint32_t> argmax;  // MaxPool2D winners, flat input index per output
  bool filled = false;
};

template <typename T>
struct LayerGradients {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

/// Forward pass. When `cache` is non-null it receives what the backward pass needs.
template <typename T>
BasicTensor<T> layer_forward(const Layer<T>& layer, const BasicTensor<T>& input, LayerCache<T>* cache = nullptr) {
  const Shape out_shape = output_shape(layer.spec, input.shape());
  BasicTensor<T> out(out_shape);
  if (cache) {
    cache->input = input;
    cache->argmax.clear();
    cache->filled = true;
  }

  if (auto c = std::get_if<Conv2DSpec>(&layer.spec)) {
    const std::size_t patches = out_shape[1] * out_shape[2];
    const auto cols = detail::im2col(input, *c, out_shape);
    detail::MatrixMap<T> o(out.data(), c->out_channels, patches);
    o.noalias() = detail::ConstMatrixMap<T>(layer.weight.data(), c->out_channels, cols.rows()) * cols;
    o.colwise() += detail::ConstVectorMap<T>(layer.bias.data(), c->out_channels);
  } else if (std::holds_alternative<ReluSpec>(layer.spec)) {
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  } else if (auto p = std::get_if<MaxPool2DSpec>(&layer.spec)) {
    const std::size_t ih = input.dim(1), iw = input.dim(2);
    const std::size_t oh = out_shape[1], ow = out_shape[2];
    std::vector<std::uint32_t> winners(out.size());
    for (std::size_t ch = 0; ch < input.dim(0); ++ch) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          std::size_t best = (ch * ih + y * p->stride) * iw + x * p->stride;
          for (std::size_t ky = 0; ky < p->kernel; ++ky) {
            for (std::size_t kx = 0; kx < p->kernel; ++kx) {
              const std::size_t idx = (ch * ih + y * p->stride + ky) * iw + x * p->stride + kx;
              if (input[idx] > input[best]) best = idx;
            }
          }
          const std::size_t o_idx = (ch * oh + y) * ow + x;
          out[o_idx] = input[best];
          winners[o_idx] = static_cast<std::uint32_t>(best);
        }
      }
    }
    if (cache) cache->argmax = std::move(winners);
  } else if (std::holds_alternative<FlattenSpec>(layer.spec)) {
    std::copy(input.data(), input.data() + input.size(), out.data());
  } else {
    const auto& d = std::get<DenseSpec>(layer.spec);
    detail::VectorMap<T>(out.data(), d.out_features).noalias() =
        detail::ConstMatrixMap<T>(layer.weight.data(), d.out_features, d.in_features) *
            detail::ConstVectorMap<T>(input.data(), d.in_features) +
        detail::ConstVectorMap<T>(layer.bias.data(), d.out_features);
  }
  return out;
}

/// Backward pass from the cached forward state. Parameter gradients are
/// written to `param_grads` when it is non-null; pass null to skip them.
template <typename T>
BasicTensor<T> layer_backward(const Layer<T>& layer, const LayerCache<T>& cache, const BasicTensor<T>& grad_out,
                              LayerGradients<T>* param_grads = nullptr) {
  if (!cache.filled) throw UsageError(layer_name(layer.spec) + " backward called without a forward cache");
  const BasicTensor<T>& input = cache.input;
  const Shape out_shape = output_shape(layer.spec, input.shape());
  if (grad_out.shape() != out_shape) {
    throw ConfigError(layer_name(layer.spec) + " output gradient shape " + grad_out.shape().to_string() +
                      " does not match output shape " + out_shape.to_string());
  }
  BasicTensor<T> grad_in(input.shape());

  if (auto c = std::get_if<Conv2DSpec>(&layer.spec)) {
    const std::size_t patches = out_shape[1] * out_shape[2];
    const std::size_t rows = c->in_channels * c->kernel_h * c->kernel_w;
    const detail::ConstMatrixMap<T> g(grad_out.data(), c->out_channels, patches);
    const detail::ConstMatrixMap<T> w(layer.weight.data(), c->out_channels, rows);
    const detail::Matrix<T> grad_cols = w.transpose() * g;
    detail::col2im_add(grad_cols, *c, out_shape, grad_in);
    if (param_grads) {
      const auto cols = detail::im2col(input, *c, out_shape);
      param_grads->weight = BasicTensor<T>(layer.weight.shape());
      param_grads->bias = BasicTensor<T>(layer.bias.shape());
      detail::MatrixMap<T>(param_grads->weight.data(), c->out_channels, rows).noalias() = g * cols.transpose();
      detail::VectorMap<T>(param_grads->bias.data(), c->out_channels) = g.rowwise().sum();
    }
  } else if (std::holds_alternative<ReluSpec>(layer.spec)) {
    // Subgradient at exactly 0 is 0.
    for (std::size_t i = 0; i < input.size(); ++i) grad_in[i] = input[i] > T{0} ? grad_out[i] : T{0};
  } else if (std::holds_alternative<MaxPool2DSpec>(layer.spec)) {
    if (cache.argmax.size() != grad_out.size()) throw UsageError("MaxPool2D cache lacks argmax indices");
    for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[cache.argmax[i]] += grad_out[i];
  } else if (std::holds_alternative<FlattenSpec>(layer.spec)) {
    std::copy(grad_out.data(), grad_out.data() + grad_out.size(), grad_in.data());
  } else {
    const auto& d = std::get<DenseSpec>(layer.spec);
    const detail::ConstMatrixMap<T> w(layer.weight.data(), d.out_features, d.in_features);
    const detail::ConstVectorMap<T> g(grad_out.data(), d.out_features);
    detail::VectorMap<T>(grad_in.data(), d.in_features).noalias() = w.transpose() * g;
    if (param_grads) {
      param_grads->weight = BasicTensor<T>(layer.weight.shape());
      param_grads->bias = grad_out;
      detail::MatrixMap<T>(param_grads->weight.data(), d.out_features, d.in_features).noalias() =
          g * detail::ConstVectorMap<T>(input.data(), d.in_features).transpose();
    }
  }
  return grad_in;
}

template <typename T>
struct LossAndGradient {
  T loss{};
  BasicTensor<T> gradient;
};

/// Softmax of a logit vector, computed with the max subtracted.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  const T peak = *std::max_element(logits.values().begin(), logits.values().end());
  BasicTensor<T> out(logits.shape());
  T total{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (T& v : out.values()) v /= total;
  return out;
}

/// loss = -log softmax(logits)[label]; gradient = softmax(logits) - one_hot(label).
template <typename T>
LossAndGradient<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::size_t label) {
  if (logits.rank() != 1 || logits.size() < 2) {
    throw ArgumentError("softmax_cross_entropy expects at least two logits, got " + logits.shape().to_string());
  }
  if (label >= logits.size()) {
    throw ArgumentError("label " + std::to_string(label) + " out of range for " + std::to_string(logits.size()) +
                        " classes");
  }
  const T peak = *std::max_element(logits.values().begin(), logits.values().end());
  T total{0};
  for (T v : logits.values()) total += std::exp(v - peak);
  const T log_z = peak + std::log(total);
  LossAndGradient<T> result{std::max(T{0}, log_z - logits[label]), softmax(logits)};
  result.gradient[label] -= T{1};
  return result;
}

}  // namespace hsia
