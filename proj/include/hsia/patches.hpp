#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsia/errors.hpp"
#include "hsia/pca.hpp"
#include "hsia/random.hpp"
#include "hsia/scene.hpp"

namespace hsia {

struct PatchOrigin {
  std::uint32_t scene_id = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

/// Patches ([K, w, w] each) with the label of their centre pixel.
struct PatchSet {
  std::vector<Tensor> patches;
  std::vector<ClassId> labels;
  std::vector<PatchOrigin> origins;

  std::size_t size() const noexcept { return patches.size(); }
  bool empty() const noexcept { return patches.empty(); }

  PatchSet subset(std::span<const std::size_t> indices) const {
    PatchSet out;
    out.patches.reserve(indices.size());
    for (std::size_t i : indices) {
      out.patches.push_back(patches.at(i));
      out.labels.push_back(labels.at(i));
      out.origins.push_back(origins.at(i));
    }
    return out;
  }
};

/// One window x window patch per labelled pixel (row-major order), zero
/// outside the scene.
inline PatchSet extract_patches(const ReducedScene& scene, std::size_t window = 11, std::uint32_t scene_id = 0) {
  if (window == 0 || window % 2 == 0) {
    throw ArgumentError("patch window must be odd and positive, got " + std::to_string(window));
  }
  const std::size_t k = scene.components(), h = scene.height(), w = scene.width();
  const auto r = static_cast<std::ptrdiff_t>(window / 2);
  PatchSet set;
  set.patches.reserve(h * w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      Tensor patch(Shape{k, window, window});
      for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t y = 0; y < window; ++y) {
          const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i) + static_cast<std::ptrdiff_t>(y) - r;
          if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t x = 0; x < window; ++x) {
            const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j) + static_cast<std::ptrdiff_t>(x) - r;
            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
            patch.at(c, y, x) = scene.planes.at(c, static_cast<std::size_t>(si), static_cast<std::size_t>(sj));
          }
        }
      }
      set.patches.push_back(std::move(patch));
      set.labels.push_back(scene.labels.at(i, j));
      set.origins.push_back({scene_id, i, j});
    }
  }
  return set;
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class shuffled split. Each class sends round(n * fraction) members to
/// train, clamped so both sides get at least one. Index lists come back sorted.
inline SplitIndices stratified_split(std::span<const ClassId> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ArgumentError("train fraction must lie strictly between 0 and 1");
  }
  std::map<ClassId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  SplitIndices out;
  for (auto& [cls, members] : by_class) {
    if (members.size() < 2) {
      throw SplitError("class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                       " patch(es); a split needs at least 2");
    }
    rng.shuffle(members);
    const auto n = members.size();
    auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline std::pair<PatchSet, PatchSet> split_train_test(const PatchSet& patches, double train_fraction,
                                                      std::uint64_t seed) {
  auto idx = stratified_split(patches.labels, train_fraction, seed);
  return {patches.subset(idx.train), patches.subset(idx.test)};
}

}  // namespace hsia
