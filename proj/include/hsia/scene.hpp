#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "hsia/errors.hpp"
#include "hsia/model.hpp"
#include "hsia/random.hpp"
#include "hsia/tensor.hpp"

namespace hsia {

/// Label value for pixels that were not evaluated; class maps render it black.
inline constexpr ClassId kUnassessed = 0xFFFF;

/// Per-pixel class ids, row-major.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<ClassId> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, ClassId fill = 0) : height(h), width(w), labels(h * w, fill) {}

  ClassId& at(std::size_t i, std::size_t j) { return labels[i * width + j]; }
  ClassId at(std::size_t i, std::size_t j) const { return labels[i * width + j]; }
  std::size_t size() const noexcept { return labels.size(); }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Hyperspectral cube [H, W, D] (band fastest) with a label per pixel.
struct HsiScene {
  Tensor cube;
  LabelMap labels;
  std::vector<std::string> class_names;

  std::size_t height() const { return cube.dim(0); }
  std::size_t width() const { return cube.dim(1); }
  std::size_t bands() const { return cube.dim(2); }
  std::size_t num_classes() const { return class_names.size(); }

  /// Throws ArgumentError if values leave [0,1], labels leave [0,C), or the
  /// label map does not match the cube's spatial extent.
  void validate() const {
    if (cube.rank() != 3) throw ArgumentError("scene cube must be [H,W,D], got " + cube.shape().to_string());
    if (labels.height != height() || labels.width != width() || labels.size() != height() * width()) {
      throw ArgumentError("label map does not match cube spatial extent");
    }
    for (float v : cube.values()) {
      if (!(v >= 0.0f && v <= 1.0f)) throw ArgumentError("scene cube value outside [0,1]");
    }
    for (ClassId c : labels.labels) {
      if (c >= num_classes()) throw ArgumentError("label " + std::to_string(c) + " outside class range");
    }
  }
};

struct BlobSpec {
  std::size_t count = 0;
  double radius_min = 1.0;
  double radius_max = 1.0;
  std::optional<ClassId> host;  // blob centres are drawn from pixels of this class
};

struct ClassRecipe {
  std::string name;
  std::vector<float> prototype;  // length D, values in [0,1]
  BlobSpec blobs;
};

/// Random disks of each class painted over a fill class, then per-pixel
/// spectrum = class prototype + N(0, noise_sigma^2), clipped to [0,1].
struct SceneRecipe {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 60;
  std::vector<ClassRecipe> classes;
  ClassId fill_class = 0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t max_attempts = 64;

  void validate() const {
    if (height == 0 || width == 0 || bands == 0) throw ArgumentError("scene extents must be positive");
    if (classes.size() < 2) throw ArgumentError("scene recipe needs at least two classes");
    if (fill_class >= classes.size()) throw ArgumentError("fill class out of range");
    if (!(noise_sigma >= 0.0)) throw ArgumentError("noise_sigma must be nonnegative");
    for (const auto& c : classes) {
      if (c.prototype.size() != bands) {
        throw ArgumentError("prototype of class '" + c.name + "' has " + std::to_string(c.prototype.size()) +
                            " bands, expected " + std::to_string(bands));
      }
      for (float v : c.prototype) {
        if (!(v >= 0.0f && v <= 1.0f)) throw ArgumentError("prototype of class '" + c.name + "' leaves [0,1]");
      }
      if (c.blobs.radius_min <= 0.0 || c.blobs.radius_max < c.blobs.radius_min) {
        throw ArgumentError("invalid blob radius range for class '" + c.name + "'");
      }
      if (c.blobs.host && *c.blobs.host >= classes.size()) {
        throw ArgumentError("host class out of range for class '" + c.name + "'");
      }
    }
    for (std::size_t a = 0; a < classes.size(); ++a) {
      for (std::size_t b = a + 1; b < classes.size(); ++b) {
        if (classes[a].prototype == classes[b].prototype) {
          throw ArgumentError("classes '" + classes[a].name + "' and '" + classes[b].name +
                              "' share a prototype");
        }
      }
    }
  }
};

namespace detail {

inline std::vector<float> spectral_curve(std::size_t bands, auto&& f) {
  std::vector<float> out(bands);
  for (std::size_t d = 0; d < bands; ++d) {
    const double t = bands > 1 ? static_cast<double>(d) / static_cast<double>(bands - 1) : 0.0;
    out[d] = static_cast<float>(std::clamp(f(t), 0.0, 1.0));
  }
  return out;
}

inline bool paint_layout(const SceneRecipe& recipe, Rng& rng, LabelMap& map) {
  map = LabelMap(recipe.height, recipe.width, recipe.fill_class);
  for (std::size_t c = 0; c < recipe.classes.size(); ++c) {
    if (c == recipe.fill_class) continue;
    const auto& blobs = recipe.classes[c].blobs;
    for (std::size_t b = 0; b < blobs.count; ++b) {
      double ci, cj;
      if (blobs.host) {
        std::vector<std::size_t> candidates;
        for (std::size_t p = 0; p < map.size(); ++p) {
          if (map.labels[p] == *blobs.host) candidates.push_back(p);
        }
        if (candidates.empty()) return false;
        const std::size_t p = candidates[rng.below(candidates.size())];
        ci = static_cast<double>(p / recipe.width);
        cj = static_cast<double>(p % recipe.width);
      } else {
        ci = rng.uniform(0.0, static_cast<double>(recipe.height));
        cj = rng.uniform(0.0, static_cast<double>(recipe.width));
      }
      const double r = rng.uniform(blobs.radius_min, blobs.radius_max);
      for (std::size_t i = 0; i < recipe.height; ++i) {
        for (std::size_t j = 0; j < recipe.width; ++j) {
          const double di = static_cast<double>(i) - ci, dj = static_cast<double>(j) - cj;
          if (di * di + dj * dj <= r * r) map.at(i, j) = static_cast<ClassId>(c);
        }
      }
    }
  }
  const std::size_t min_pixels = (map.size() + 99) / 100;
  std::vector<std::size_t> counts(recipe.classes.size(), 0);
  for (ClassId l : map.labels) ++counts[l];
  return std::all_of(counts.begin(), counts.end(), [&](std::size_t n) { return n >= min_pixels; });
}

}  // namespace detail

inline HsiScene generate_scene(const SceneRecipe& recipe) {
  recipe.validate();
  Rng rng(recipe.seed);
  LabelMap map;
  bool ok = false;
  for (std::size_t attempt = 0; attempt < recipe.max_attempts && !ok; ++attempt) {
    ok = detail::paint_layout(recipe, rng, map);
  }
  if (!ok) {
    throw GenerationError("could not place blobs so every class covers 1% of the scene after " +
                          std::to_string(recipe.max_attempts) + " attempts");
  }

  HsiScene scene;
  scene.labels = map;
  for (const auto& c : recipe.classes) scene.class_names.push_back(c.name);
  scene.cube = Tensor(Shape{recipe.height, recipe.width, recipe.bands});
  float* out = scene.cube.data();
  for (std::size_t p = 0; p < map.size(); ++p) {
    const auto& proto = recipe.classes[map.labels[p]].prototype;
    for (std::size_t d = 0; d < recipe.bands; ++d) {
      float v = proto[d];
      if (recipe.noise_sigma > 0.0) {
        v = static_cast<float>(std::clamp(static_cast<double>(proto[d]) + recipe.noise_sigma * rng.normal(), 0.0, 1.0));
      }
      out[p * recipe.bands + d] = v;
    }
  }
  return scene;
}

/// Four classes mirroring an intraoperative brain scene: normal tissue,
/// tumor (embedded in normal tissue), blood vessels, background.
inline SceneRecipe brain_recipe(std::uint64_t seed, std::size_t height = 64, std::size_t width = 64,
                                std::size_t bands = 60, double noise_sigma = 0.05) {
  using std::numbers::pi;
  SceneRecipe r;
  r.height = height;
  r.width = width;
  r.bands = bands;
  r.noise_sigma = noise_sigma;
  r.seed = seed;
  r.fill_class = 3;
  auto normal = [](double t) { return 0.45 + 0.10 * std::sin(1.5 * pi * t); };
  r.classes = {
      {"normal", detail::spectral_curve(bands, normal), {3, 11.0, 16.0, std::nullopt}},
      {"tumor", detail::spectral_curve(bands, [&](double t) { return normal(t) - 0.06 + 0.12 * t; }),
       {4, 4.0, 6.5, ClassId{0}}},
      {"vessel", detail::spectral_curve(bands, [](double t) { return 0.30 + 0.25 * t * t; }),
       {8, 1.5, 2.5, ClassId{0}}},
      {"background", detail::spectral_curve(bands, [](double t) { return 0.92 - 0.03 * t; }), {}},
  };
  return r;
}

/// Binary normal/cancer scene in the style of choledoch microscopy data.
inline SceneRecipe mdc_recipe(std::uint64_t seed, std::size_t height = 64, std::size_t width = 64,
                              std::size_t bands = 60, double noise_sigma = 0.05) {
  using std::numbers::pi;
  SceneRecipe r;
  r.height = height;
  r.width = width;
  r.bands = bands;
  r.noise_sigma = noise_sigma;
  r.seed = seed;
  r.fill_class = 0;
  auto normal = [](double t) { return 0.55 + 0.10 * std::cos(pi * t); };
  r.classes = {
      {"normal", detail::spectral_curve(bands, normal), {}},
      {"cancer", detail::spectral_curve(bands, [&](double t) { return normal(t) - 0.08 * t; }),
       {4, 6.0, 10.0, std::nullopt}},
  };
  return r;
}

}  // namespace hsia
