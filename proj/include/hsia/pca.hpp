#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hsia/errors.hpp"
#include "hsia/scene.hpp"
#include "hsia/tensor.hpp"

namespace hsia {

struct PcaModel {
  Tensor mean;                // [D]
  Tensor components;          // [K, D], rows orthonormal
  Tensor explained_variance;  // [K], nonincreasing

  std::size_t input_dim() const { return components.dim(1); }
  std::size_t output_dim() const { return components.dim(0); }
};

/// Reduced scene: [K, H, W] component planes plus the unchanged label map.
struct ReducedScene {
  Tensor planes;
  LabelMap labels;
  std::vector<std::string> class_names;

  std::size_t components() const { return planes.dim(0); }
  std::size_t height() const { return planes.dim(1); }
  std::size_t width() const { return planes.dim(2); }
};

/// Top-K eigenvectors of the sample covariance of `spectra` ([N, D]).
/// Each component's sign is fixed so its largest-magnitude entry is positive.
inline PcaModel pca_fit(const Tensor& spectra, std::size_t k) {
  if (spectra.rank() != 2) throw ArgumentError("pca_fit expects [N,D] spectra, got " + spectra.shape().to_string());
  const std::size_t n = spectra.dim(0), d = spectra.dim(1);
  if (k == 0 || k > d) throw ArgumentError("PCA needs 0 < K <= D, got K=" + std::to_string(k) + ", D=" + std::to_string(d));
  if (n <= k) throw ArgumentError("PCA needs more samples than components, got N=" + std::to_string(n));

  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = spectra.at(i, j);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");

  PcaModel model{Tensor(Shape{d}), Tensor(Shape{k, d}), Tensor(Shape{k})};
  for (std::size_t j = 0; j < d; ++j) model.mean[j] = static_cast<float>(mu(j));
  // Eigen returns ascending eigenvalues.
  for (std::size_t c = 0; c < k; ++c) {
    const auto col = static_cast<Eigen::Index>(d - 1 - c);
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index peak;
    v.cwiseAbs().maxCoeff(&peak);
    if (v(peak) < 0) v = -v;
    for (std::size_t j = 0; j < d; ++j) model.components.at(c, j) = static_cast<float>(v(j));
    model.explained_variance[c] = static_cast<float>(std::max(0.0, solver.eigenvalues()(col)));
  }
  return model;
}

/// Component vector of one spectrum: components * (spectrum - mean).
inline std::vector<float> pca_project(const PcaModel& model, std::span<const float> spectrum) {
  const std::size_t k = model.output_dim(), d = model.input_dim();
  if (spectrum.size() != d) {
    throw ArgumentError("spectrum has " + std::to_string(spectrum.size()) + " bands, PCA expects " + std::to_string(d));
  }
  std::vector<float> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      acc += static_cast<double>(model.components.at(c, j)) * (static_cast<double>(spectrum[j]) - model.mean[j]);
    }
    out[c] = static_cast<float>(acc);
  }
  return out;
}

inline ReducedScene pca_transform(const PcaModel& model, const HsiScene& scene) {
  if (scene.bands() != model.input_dim()) {
    throw ArgumentError("scene has " + std::to_string(scene.bands()) + " bands, PCA model expects " +
                        std::to_string(model.input_dim()));
  }
  const std::size_t h = scene.height(), w = scene.width(), d = scene.bands(), k = model.output_dim();
  ReducedScene out{Tensor(Shape{k, h, w}), scene.labels, scene.class_names};
  for (std::size_t p = 0; p < h * w; ++p) {
    auto v = pca_project(model, std::span<const float>(scene.cube.data() + p * d, d));
    for (std::size_t c = 0; c < k; ++c) out.planes[c * h * w + p] = v[c];
  }
  return out;
}

/// Back-projection of [K, H, W] component planes to an [H, W, D] cube.
inline Tensor pca_inverse(const PcaModel& model, const Tensor& planes) {
  const std::size_t k = planes.dim(0), h = planes.dim(1), w = planes.dim(2), d = model.input_dim();
  if (k != model.output_dim()) throw ArgumentError("component count does not match PCA model");
  Tensor cube(Shape{h, w, d});
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = model.mean[j];
      for (std::size_t c = 0; c < k; ++c) acc += static_cast<double>(model.components.at(c, j)) * planes[c * h * w + p];
      cube[p * d + j] = static_cast<float>(acc);
    }
  }
  return cube;
}

/// Spectra of the given pixel indices as an [N, D] matrix.
inline Tensor gather_spectra(const HsiScene& scene, std::span<const std::size_t> pixels) {
  const std::size_t d = scene.bands();
  Tensor out(Shape{pixels.size(), d});
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    std::copy_n(scene.cube.data() + pixels[i] * d, d, out.data() + i * d);
  }
  return out;
}

/// Per-component affine map into [0,1], fitted on a pixel subset:
/// v' = clamp((v - lo_k) / (hi_k - lo_k), 0, 1).
struct ComponentScaling {
  std::vector<float> lo;
  std::vector<float> hi;

  float apply(std::size_t component, float v) const {
    return std::clamp((v - lo[component]) / (hi[component] - lo[component]), 0.0f, 1.0f);
  }
};

inline ComponentScaling fit_scaling(const ReducedScene& reduced, std::span<const std::size_t> pixels) {
  if (pixels.empty()) throw ArgumentError("cannot fit component scaling on zero pixels");
  const std::size_t plane = reduced.height() * reduced.width();
  ComponentScaling s;
  for (std::size_t c = 0; c < reduced.components(); ++c) {
    float lo = reduced.planes[c * plane + pixels[0]], hi = lo;
    for (std::size_t p : pixels) {
      const float v = reduced.planes[c * plane + p];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) hi = lo + 1.0f;
    s.lo.push_back(lo);
    s.hi.push_back(hi);
  }
  return s;
}

inline ReducedScene apply_scaling(const ComponentScaling& scaling, ReducedScene reduced) {
  if (scaling.lo.size() != reduced.components()) throw ArgumentError("scaling does not match component count");
  const std::size_t plane = reduced.height() * reduced.width();
  for (std::size_t c = 0; c < reduced.components(); ++c)
    for (std::size_t p = 0; p < plane; ++p) {
      float& v = reduced.planes[c * plane + p];
      v = scaling.apply(c, v);
    }
  return reduced;
}

}  // namespace hsia
