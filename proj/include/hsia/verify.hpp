#pragma once

// `hsia verify`: the oracle suite as a user-facing smoke test. Each property
// prints one PASS/FAIL line; a failure names the first counterexample.

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hsia/attacks.hpp"
#include "hsia/metrics.hpp"
#include "hsia/oracles.hpp"
#include "hsia/random.hpp"
#include "hsia/tensor.hpp"

namespace hsia {

/// Swappable implementations under test. The defaults are the library
/// functions; tests substitute broken versions to check that faults surface.
struct VerifyHooks {
  std::function<Tensor(const Tensor&, std::size_t)> box_filter = [](const Tensor& f, std::size_t k) {
    return box_filter_mean(f, k);
  };
  std::function<Tensor(const Tensor&, std::size_t)> downsample_fn = [](const Tensor& b, std::size_t s) {
    return downsample(b, s);
  };
  std::function<Tensor(const Tensor&, std::size_t, std::size_t)> upsample_fn =
      [](const Tensor& b, std::size_t h, std::size_t w) { return upsample(b, h, w); };
};

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::string detail;  // summary on success, first counterexample on failure
};

struct VerifyReport {
  std::vector<PropertyResult> properties;
  bool all_passed() const {
    for (const auto& p : properties)
      if (!p.passed) return false;
    return true;
  }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// First index where |a - b| > tol * max(1, |b|).
inline std::optional<std::size_t> first_mismatch(const Tensor& a, const std::vector<double>& b, double tol) {
  if (a.size() != b.size()) return 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!(std::fabs(a[i] - b[i]) <= tol * std::max(1.0, std::fabs(b[i])))) return i;
  }
  return std::nullopt;
}

inline PropertyResult gradient_property(const oracle::GradientCheck& c, double tol) {
  PropertyResult r{"gradient/" + c.name, true, ""};
  const double worst = std::max(c.max_input_error, c.max_param_error);
  r.passed = worst < tol;
  r.detail = std::to_string(c.trials) + " trials, max rel err input " + fmt(c.max_input_error) + " params " +
             fmt(c.max_param_error) + ", " + std::to_string(c.skipped_coordinates) + " kink coordinates skipped";
  return r;
}

template <typename Trial>
PropertyResult run_trials(const std::string& name, std::size_t trials, Trial&& trial) {
  for (std::size_t t = 0; t < trials; ++t) {
    std::string why = trial(t);
    if (!why.empty()) return {name, false, "trial " + std::to_string(t) + ": " + why};
  }
  return {name, true, std::to_string(trials) + " trials"};
}

inline std::vector<ClassId> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<ClassId> out(n);
  for (auto& v : out) v = static_cast<ClassId>(rng.below(classes));
  return out;
}

}  // namespace detail

inline constexpr double kGradientTolerance = 1e-4;
inline constexpr double kTensorTolerance = 1e-6;
inline constexpr double kMetricTolerance = 1e-9;

/// Runs every property. `out` receives one line per property as it finishes.
inline VerifyReport run_verify(std::ostream& out, const VerifyHooks& hooks = {}, std::uint64_t seed = 20240917) {
  VerifyReport report;
  auto record = [&](PropertyResult r) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    out.flush();
    report.properties.push_back(std::move(r));
  };

  for (std::size_t kind = 0; kind < 5; ++kind) {
    record(detail::gradient_property(oracle::check_layer_gradients(kind, 60, seed + kind), kGradientTolerance));
  }
  record(detail::gradient_property(oracle::check_classifier_gradients(60, 12, seed + 10), kGradientTolerance));

  Rng rng(seed + 100);
  auto random_plane = [&](std::size_t max_side) {
    return oracle::random_tensor(rng, Shape{1 + rng.below(max_side), 1 + rng.below(max_side)});
  };

  record(detail::run_trials("oracle/box_filter_mean", 60, [&](std::size_t) -> std::string {
    const Tensor f = random_plane(9);
    const std::size_t k = 1 + 2 * rng.below(4);
    const Tensor got = hooks.box_filter(f, k);
    const auto want = oracle::box_filter(f, k);
    if (auto i = detail::first_mismatch(got, want, kTensorTolerance)) {
      return "field " + f.shape().to_string() + " k=" + std::to_string(k) + " element " + std::to_string(*i) +
             " got " + detail::fmt(*i < got.size() ? got[*i] : NAN) + " expected " + detail::fmt(want[*i]);
    }
    return "";
  }));

  record(detail::run_trials("oracle/downsample", 60, [&](std::size_t) -> std::string {
    const Tensor b = random_plane(10);
    const std::size_t s = 1 + rng.below(4);
    const Tensor got = hooks.downsample_fn(b, s);
    const auto want = oracle::downsample(b, s);
    if (auto i = detail::first_mismatch(got, want, kTensorTolerance)) {
      return "band " + b.shape().to_string() + " s=" + std::to_string(s) + " element " + std::to_string(*i);
    }
    return "";
  }));

  record(detail::run_trials("oracle/upsample", 60, [&](std::size_t) -> std::string {
    const Tensor b = random_plane(5);
    const std::size_t h = b.dim(0) + rng.below(7), w = b.dim(1) + rng.below(7);
    const Tensor got = hooks.upsample_fn(b, h, w);
    const auto want = oracle::upsample(b, h, w);
    if (auto i = detail::first_mismatch(got, want, 0.0)) {
      return "band " + b.shape().to_string() + " to " + std::to_string(h) + "x" + std::to_string(w) + " element " +
             std::to_string(*i);
    }
    return "";
  }));

  for (MiaMode mode : {MiaMode::Residual, MiaMode::Literal}) {
    const std::string name = mode == MiaMode::Residual ? "oracle/mia_residual" : "oracle/mia_literal";
    record(detail::run_trials(name, 60, [&](std::size_t) -> std::string {
      const std::size_t k = 1 + rng.below(3), h = 4 + rng.below(6), w = 4 + rng.below(6);
      const Tensor x = oracle::random_tensor(rng, Shape{k, h, w}, 0.0, 1.0);
      const Tensor g = oracle::random_tensor(rng, Shape{k, h, w});
      AttackConfig cfg;
      cfg.mia_mode = mode;
      cfg.epsilon = static_cast<float>(rng.uniform(0.001, 0.1));
      const Tensor got = mia_aggregate(x, g, cfg);
      const auto want = oracle::mia_aggregate(x, g, cfg);
      if (auto i = detail::first_mismatch(got, want, kTensorTolerance)) {
        return "patch " + x.shape().to_string() + " element " + std::to_string(*i) + " got " + detail::fmt(got[*i]) +
               " expected " + detail::fmt(want[*i]);
      }
      return "";
    }));
  }

  record(detail::run_trials("oracle/metrics", 200, [&](std::size_t) -> std::string {
    const std::size_t classes = 2 + rng.below(5), n = 1 + rng.below(60);
    const auto truth = detail::random_labels(rng, n, classes);
    auto pred = detail::random_labels(rng, n, classes);
    for (std::size_t i = 0; i < n; ++i)
      if (rng.uniform() < 0.5) pred[i] = truth[i];
    const auto m = confusion(truth, pred, classes);
    const auto counts = oracle::confusion_counts(truth, pred, classes);
    for (std::size_t a = 0; a < classes; ++a)
      for (std::size_t b = 0; b < classes; ++b)
        if (m.at(a, b) != counts[a * classes + b]) return "confusion cell " + std::to_string(a) + "," + std::to_string(b);
    if (std::fabs(overall_accuracy(m) - oracle::overall_accuracy(truth, pred)) > kMetricTolerance) return "OA";
    if (std::fabs(average_accuracy(m) - oracle::average_accuracy(truth, pred, classes)) > kMetricTolerance) return "AA";
    const auto want = oracle::cohens_kappa(truth, pred, classes);
    if (want) {
      if (std::fabs(cohens_kappa(m) - *want) > kMetricTolerance) return "kappa";
    }
    return "";
  }));

  // Reduction identities, checked element-exactly.
  record(detail::run_trials("identity/lpda_k1", 20, [&](std::size_t) -> std::string {
    const PatchClassifier model = oracle::random_small_classifier(rng);
    const Tensor x = oracle::random_tensor(rng, model.contract().patch_shape(), 0.0, 1.0);
    const ClassId y = static_cast<ClassId>(rng.below(model.num_classes()));
    AttackConfig cfg;
    cfg.window = 1;
    cfg.iterations = 1 + rng.below(6);
    const Tensor got = lpda(x, y, model, cfg).adversarial;
    const Tensor want = oracle::normalized_gradient_steps(x, y, model, cfg.epsilon, cfg.iterations);
    for (std::size_t i = 0; i < got.size(); ++i)
      if (got[i] != want[i]) return "element " + std::to_string(i) + " differs";
    return "";
  }));

  record(detail::run_trials("identity/mia_single_scale", 20, [&](std::size_t) -> std::string {
    Rng local(rng.next_u64());
    const std::vector<LayerSpec> specs{FlattenSpec{}, DenseSpec{36, 3}};
    std::vector<Layer<float>> layers;
    for (const auto& s : specs) {
      auto l = Layer<float>::make(s);
      if (has_parameters(s)) {
        l.weight = oracle::random_tensor(local, l.weight.shape());
        l.bias = oracle::random_tensor(local, l.bias.shape());
      }
      layers.push_back(std::move(l));
    }
    const PatchClassifier model(ModelContract{1, 6, 6}, 3, std::move(layers));
    const Tensor x = oracle::random_tensor(local, model.contract().patch_shape(), 0.0, 1.0);
    const ClassId y = static_cast<ClassId>(local.below(3));
    AttackConfig cfg;
    cfg.scales = {1};
    const Tensor got = mia(x, y, model, cfg).adversarial;
    const Tensor want = oracle::normalized_gradient_steps(x, y, model, cfg.epsilon, 1);
    for (std::size_t i = 0; i < got.size(); ++i)
      if (got[i] != want[i]) return "element " + std::to_string(i) + " differs";
    return "";
  }));

  record(detail::run_trials("identity/combined_additivity", 20, [&](std::size_t) -> std::string {
    const PatchClassifier model = oracle::random_small_classifier(rng);
    const Tensor x = oracle::random_tensor(rng, model.contract().patch_shape(), 0.0, 1.0);
    const ClassId y = static_cast<ClassId>(rng.below(model.num_classes()));
    AttackConfig cfg;
    cfg.iterations = 5;
    const AttackResult r = combined_attack(x, y, model, cfg);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (r.perturbation.delta[i] != r.local->delta[i] + r.multiscale->delta[i]) {
        return "element " + std::to_string(i) + " of delta_final differs from delta_local + delta_multiscale";
      }
      if (r.adversarial[i] != std::clamp(x[i] + r.perturbation.delta[i], cfg.clip_lo, cfg.clip_hi)) {
        return "element " + std::to_string(i) + " of the adversarial patch is not clip(x + delta_final)";
      }
    }
    return "";
  }));

  return report;
}

}  // namespace hsia
