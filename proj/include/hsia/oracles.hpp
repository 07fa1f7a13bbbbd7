#pragma once

// Slow reference implementations used by the test suite and `hsia verify`.
// Nothing in the production path calls into this header. Every oracle works
// in double and is written from the defining formula (explicit window and
// block enumeration, label-pair counting, central differences), not by
// reusing the optimized code it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsia/attacks.hpp"
#include "hsia/layers.hpp"
#include "hsia/metrics.hpp"
#include "hsia/model.hpp"
#include "hsia/random.hpp"
#include "hsia/tensor.hpp"

namespace hsia::oracle {

/// Mean over the in-bounds part of the k x k window around every pixel.
inline std::vector<double> box_filter(const Tensor& field, std::size_t k) {
  const std::size_t h = field.dim(0), w = field.dim(1);
  const long r = static_cast<long>(k / 2);
  std::vector<double> out(h * w);
  for (long i = 0; i < static_cast<long>(h); ++i) {
    for (long j = 0; j < static_cast<long>(w); ++j) {
      double sum = 0.0;
      int n = 0;
      for (long a = i - r; a <= i + r; ++a) {
        for (long b = j - r; b <= j + r; ++b) {
          if (a < 0 || b < 0 || a >= static_cast<long>(h) || b >= static_cast<long>(w)) continue;
          sum += field.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
          ++n;
        }
      }
      out[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)] = sum / n;
    }
  }
  return out;
}

/// Mean of the in-bounds members of block (bi, bj) of side s.
inline double block_mean(const Tensor& band, std::size_t s, std::size_t bi, std::size_t bj) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t a = bi * s; a < std::min(band.dim(0), bi * s + s); ++a) {
    for (std::size_t b = bj * s; b < std::min(band.dim(1), bj * s + s); ++b) {
      sum += band.at(a, b);
      ++n;
    }
  }
  return sum / n;
}

inline std::vector<double> downsample(const Tensor& band, std::size_t s) {
  const std::size_t oh = (band.dim(0) + s - 1) / s, ow = (band.dim(1) + s - 1) / s;
  std::vector<double> out;
  for (std::size_t bi = 0; bi < oh; ++bi)
    for (std::size_t bj = 0; bj < ow; ++bj) out.push_back(block_mean(band, s, bi, bj));
  return out;
}

/// Nearest neighbour: output (i, j) reads source (floor(i*h/H), floor(j*w/W)).
inline std::vector<double> upsample(const Tensor& band, std::size_t height, std::size_t width) {
  const std::size_t h = band.dim(0), w = band.dim(1);
  std::vector<double> out;
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const auto si = static_cast<std::size_t>(std::floor(static_cast<double>(i) * h / height));
      const auto sj = static_cast<std::size_t>(std::floor(static_cast<double>(j) * w / width));
      out.push_back(band.at(si, sj));
    }
  }
  return out;
}

/// Multiscale aggregate p as one loop nest: for every pixel, scale and
/// component, find the coarse cell the pixel reads back from and average the
/// fine pixels of that cell.
inline std::vector<double> mia_aggregate(const Tensor& patch, const Tensor& grad, const AttackConfig& cfg) {
  const std::size_t k = patch.dim(0), h = patch.dim(1), w = patch.dim(2);
  double peak = 0.0;
  for (float g : grad.values()) peak = std::max(peak, std::fabs(static_cast<double>(g)));
  std::vector<double> p(h * w, 0.0);
  for (std::size_t s : cfg.scales) {
    const std::size_t ch = (h + s - 1) / s, cw = (w + s - 1) / s;
    for (std::size_t d = 0; d < k; ++d) {
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          const std::size_t bi = i * ch / h, bj = j * cw / w;
          double gsum = 0.0, xsum = 0.0;
          int n = 0;
          for (std::size_t a = bi * s; a < std::min(h, bi * s + s); ++a) {
            for (std::size_t b = bj * s; b < std::min(w, bj * s + s); ++b) {
              gsum += grad.at(d, a, b);
              xsum += patch.at(d, a, b);
              ++n;
            }
          }
          if (cfg.mia_mode == MiaMode::Residual) {
            p[i * w + j] += gsum / n;
          } else {
            const double unit = peak > 0.0 ? gsum / n / peak : 0.0;
            p[i * w + j] += xsum / n + cfg.epsilon * unit;
          }
        }
      }
    }
  }
  return p;
}

/// Confusion counts by enumerating (truth, pred) pairs per cell.
inline std::vector<std::uint64_t> confusion_counts(std::span<const ClassId> truth, std::span<const ClassId> pred,
                                                   std::size_t classes) {
  std::vector<std::uint64_t> m(classes * classes, 0);
  for (std::size_t a = 0; a < classes; ++a)
    for (std::size_t b = 0; b < classes; ++b)
      for (std::size_t n = 0; n < truth.size(); ++n)
        if (truth[n] == a && pred[n] == b) ++m[a * classes + b];
  return m;
}

inline double overall_accuracy(std::span<const ClassId> truth, std::span<const ClassId> pred) {
  std::size_t hits = 0;
  for (std::size_t n = 0; n < truth.size(); ++n) hits += truth[n] == pred[n];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Mean per-class recall over classes that occur in `truth`.
inline double average_accuracy(std::span<const ClassId> truth, std::span<const ClassId> pred, std::size_t classes) {
  double sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t members = 0, hits = 0;
    for (std::size_t n = 0; n < truth.size(); ++n) {
      if (truth[n] != c) continue;
      ++members;
      hits += pred[n] == c;
    }
    if (members == 0) continue;
    sum += static_cast<double>(hits) / static_cast<double>(members);
    ++present;
  }
  return sum / present;
}

/// Cohen's kappa with the chance term taken as the probability that an
/// independently drawn (truth, pred) pair agrees. Empty optional when that
/// chance term is 1.
inline std::optional<double> cohens_kappa(std::span<const ClassId> truth, std::span<const ClassId> pred,
                                          std::size_t classes) {
  const double n = static_cast<double>(truth.size());
  double agree_by_chance = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double t = static_cast<double>(std::count(truth.begin(), truth.end(), c));
    const double p = static_cast<double>(std::count(pred.begin(), pred.end(), c));
    agree_by_chance += (t / n) * (p / n);
  }
  if (agree_by_chance >= 1.0) return std::nullopt;
  return (overall_accuracy(truth, pred) - agree_by_chance) / (1.0 - agree_by_chance);
}

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-12 ? 0.0 : std::sqrt(diff) / scale;
}

/// Central difference of f along coordinate `value`, or nothing when two step
/// sizes disagree (a ReLU or max-pool switch lies inside the stencil).
inline std::optional<double> central_difference(double& value, const std::function<double()>& f) {
  auto at_step = [&](double h) {
    const double saved = value;
    value = saved + h;
    const double up = f();
    value = saved - h;
    const double down = f();
    value = saved;
    return (up - down) / (2.0 * h);
  };
  const double coarse = at_step(1e-5), fine = at_step(1e-6);
  if (std::fabs(coarse - fine) > 1e-5 * std::max(1.0, std::fabs(coarse))) return std::nullopt;
  return coarse;
}

/// Plain iterated ascent x <- clip(x + sign * eps * g / max|g|) with no
/// smoothing, where g is the input gradient of the loss on `label`.
inline Tensor normalized_gradient_steps(Tensor x, std::size_t label, const PatchClassifier& model, float epsilon,
                                        std::size_t steps, float sign = 1.0f, float lo = 0.0f, float hi = 1.0f) {
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor g = model.loss_and_input_gradient(x, label).gradient;
    float peak = 0.0f;
    for (float v : g.values()) peak = std::max(peak, std::fabs(v));
    if (peak == 0.0f) continue;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i] + sign * epsilon * (g[i] / peak), lo, hi);
  }
  return x;
}

struct GradientCheck {
  std::string name;
  std::size_t trials = 0;
  std::size_t skipped_coordinates = 0;
  double max_input_error = 0.0;
  double max_param_error = 0.0;
};

inline Tensor random_tensor(Rng& rng, const Shape& shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline LayerSpec random_layer_spec(Rng& rng, std::size_t kind, Shape& input) {
  const auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); };
  switch (kind) {
    case 0: {
      const std::size_t cin = pick(1, 3), kh = pick(1, 3), kw = pick(1, 3), stride = pick(1, 2);
      input = Shape{cin, pick(kh, 6), pick(kw, 6)};
      return Conv2DSpec{cin, pick(1, 4), kh, kw, stride};
    }
    case 1: input = Shape{pick(1, 3), pick(1, 5), pick(1, 5)}; return ReluSpec{};
    case 2: {
      const std::size_t kk = pick(1, 3), stride = pick(1, 2);
      input = Shape{pick(1, 3), pick(kk, 6), pick(kk, 6)};
      return MaxPool2DSpec{kk, stride};
    }
    case 3: input = Shape{pick(1, 3), pick(1, 4), pick(1, 4)}; return FlattenSpec{};
    default: {
      const std::size_t in = pick(1, 12);
      input = Shape{in};
      return DenseSpec{in, pick(1, 6)};
    }
  }
}

/// Finite-difference check of one layer kind (0 conv, 1 relu, 2 maxpool,
/// 3 flatten, 4 dense) under the scalar loss sum(r * forward(x)) with random
/// r. The float analytic gradient is compared with double central
/// differences; every input and parameter coordinate is checked.
inline GradientCheck check_layer_gradients(std::size_t kind, std::size_t trials, std::uint64_t seed) {
  static const char* names[] = {"Conv2D", "ReLU", "MaxPool2D", "Flatten", "Dense"};
  GradientCheck out{names[kind], trials, 0, 0.0, 0.0};
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Shape in_shape{1};
    Layer<float> layer = Layer<float>::make(random_layer_spec(rng, kind, in_shape));
    if (has_parameters(layer.spec)) {
      layer.weight = random_tensor(rng, layer.weight.shape());
      layer.bias = random_tensor(rng, layer.bias.shape());
    }
    const Tensor x = random_tensor(rng, in_shape);
    const Shape out_shape = output_shape(layer.spec, in_shape);
    const Tensor r = random_tensor(rng, out_shape);

    LayerCache<float> cache;
    layer_forward(layer, x, &cache);
    LayerGradients<float> pg;
    const Tensor gx = layer_backward(layer, cache, r, has_parameters(layer.spec) ? &pg : nullptr);

    Layer<double> dl = layer.cast<double>();
    BasicTensor<double> dx = x.cast<double>();
    const BasicTensor<double> dr = r.cast<double>();
    auto loss = [&] {
      const auto y = layer_forward(dl, dx);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * dr[i];
      return s;
    };

    auto compare = [&](BasicTensor<double>& target, const Tensor& analytic, double& worst) {
      std::vector<double> a, n;
      for (std::size_t i = 0; i < target.size(); ++i) {
        auto fd = central_difference(target[i], loss);
        if (!fd) {
          ++out.skipped_coordinates;
          continue;
        }
        a.push_back(analytic[i]);
        n.push_back(*fd);
      }
      worst = std::max(worst, relative_error(a, n));
    };
    compare(dx, gx, out.max_input_error);
    if (has_parameters(layer.spec)) {
      compare(dl.weight, pg.weight, out.max_param_error);
      compare(dl.bias, pg.bias, out.max_param_error);
    }
  }
  return out;
}

/// Small classifier with every layer kind: Conv -> ReLU -> MaxPool -> Conv ->
/// ReLU -> Flatten -> Dense -> ReLU -> Dense, random weights and biases.
inline PatchClassifier random_small_classifier(Rng& rng, std::size_t classes = 3) {
  const ModelContract contract{3, 8, 8};
  std::vector<LayerSpec> specs{Conv2DSpec{3, 4, 3, 3, 1}, ReluSpec{},  MaxPool2DSpec{2, 2},
                               Conv2DSpec{4, 5, 2, 2, 1}, ReluSpec{},  FlattenSpec{},
                               DenseSpec{20, 8},          ReluSpec{},  DenseSpec{8, classes}};
  std::vector<Layer<float>> layers;
  for (const auto& s : specs) {
    auto l = Layer<float>::make(s);
    if (has_parameters(s)) {
      l.weight = random_tensor(rng, l.weight.shape(), -0.6, 0.6);
      l.bias = random_tensor(rng, l.bias.shape(), -0.2, 0.2);
    }
    layers.push_back(std::move(l));
  }
  return PatchClassifier(contract, classes, std::move(layers));
}

/// Finite-difference check of the full cross-entropy network: `coords`
/// random input coordinates and `coords` random coordinates of every
/// parameter tensor per trial.
inline GradientCheck check_classifier_gradients(std::size_t trials, std::size_t coords, std::uint64_t seed) {
  GradientCheck out{"PatchClassifier", trials, 0, 0.0, 0.0};
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const PatchClassifier model = random_small_classifier(rng);
    const Tensor x = random_tensor(rng, model.contract().patch_shape(), 0.0, 1.0);
    const std::size_t label = rng.below(model.num_classes());
    const auto grads = model.loss_and_gradients(x, label);

    auto dm = model.cast<double>();
    BasicTensor<double> dx = x.cast<double>();
    auto loss = [&] { return static_cast<double>(dm.loss_and_input_gradient(dx, label).loss); };

    auto compare = [&](BasicTensor<double>& target, const Tensor& analytic, double& worst) {
      std::vector<double> a, n;
      for (std::size_t c = 0; c < std::min(coords, target.size()); ++c) {
        const std::size_t i = rng.below(target.size());
        auto fd = central_difference(target[i], loss);
        if (!fd) {
          ++out.skipped_coordinates;
          continue;
        }
        a.push_back(analytic[i]);
        n.push_back(*fd);
      }
      worst = std::max(worst, relative_error(a, n));
    };
    compare(dx, grads.input, out.max_input_error);
    for (std::size_t l = 0; l < dm.layers().size(); ++l) {
      if (!has_parameters(dm.layers()[l].spec)) continue;
      compare(dm.layers()[l].weight, grads.layers[l].weight, out.max_param_error);
      compare(dm.layers()[l].bias, grads.layers[l].bias, out.max_param_error);
    }
  }
  return out;
}

}  // namespace hsia::oracle
