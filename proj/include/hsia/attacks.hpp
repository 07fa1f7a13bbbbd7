#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hsia/errors.hpp"
#include "hsia/metrics.hpp"
#include "hsia/model.hpp"
#include "hsia/patches.hpp"
#include "hsia/scene.hpp"
#include "hsia/tensor.hpp"

namespace hsia {

enum class AttackKind { None, Lpda, Mia, Combined, Baseline };
enum class MiaMode { Residual, Literal };
enum class Direction { Untargeted, Targeted };
enum class Provenance { None, Local, Multiscale, Combined, Baseline };

inline std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Lpda: return "lpda";
    case AttackKind::Mia: return "mia";
    case AttackKind::Combined: return "combined";
    case AttackKind::Baseline: return "baseline";
  }
  return "?";
}

inline AttackKind parse_attack_kind(const std::string& s) {
  if (s == "none") return AttackKind::None;
  if (s == "lpda") return AttackKind::Lpda;
  if (s == "mia") return AttackKind::Mia;
  if (s == "combined") return AttackKind::Combined;
  if (s == "baseline") return AttackKind::Baseline;
  throw ArgumentError("unknown attack kind '" + s + "'");
}

struct AttackConfig {
  float epsilon = 0.03f;
  std::size_t iterations = 20;
  std::size_t window = 3;
  std::vector<std::size_t> scales{1, 2, 4};
  MiaMode mia_mode = MiaMode::Residual;
  std::optional<ClassId> target_class;
  Direction direction = Direction::Untargeted;
  float clip_lo = 0.0f;
  float clip_hi = 1.0f;

  void validate() const {
    if (!(epsilon >= 0.0f) || !std::isfinite(epsilon)) throw ArgumentError("epsilon must be finite and nonnegative");
    if (iterations < 1) throw ArgumentError("iterations must be >= 1");
    if (window == 0 || window % 2 == 0) throw ArgumentError("attack window must be odd and positive");
    if (scales.empty()) throw ArgumentError("scale set must not be empty");
    for (auto s : scales) {
      if (s < 1) throw ArgumentError("scales must be positive integers");
    }
    if (direction == Direction::Targeted && !target_class) {
      throw ArgumentError("targeted attack requires target_class");
    }
    if (clip_lo > clip_hi) throw ArgumentError("clip range is empty");
  }
};

struct Perturbation {
  Tensor delta;  // unclipped; the adversarial input is clip(x + delta)
  Provenance provenance = Provenance::None;
  PerturbationBudget budget;  // measured between the clean and adversarial inputs
};

struct AttackResult {
  Tensor adversarial;
  Perturbation perturbation;
  // Objective value at every iterate x(0) .. x(T) (LPDA only).
  std::vector<float> loss_history;
  std::size_t stalled_steps = 0;
  // Constituents of a combined attack.
  std::optional<Perturbation> local;
  std::optional<Perturbation> multiscale;
};

namespace detail {

inline void require_finite(const Tensor& g, const char* where) {
  if (!g.all_finite()) throw NumericError(std::string("non-finite gradient in ") + where);
}

inline void require_in_range(const Tensor& patch, const AttackConfig& cfg) {
  for (float v : patch.values()) {
    if (!(v >= cfg.clip_lo && v <= cfg.clip_hi)) throw ArgumentError("attacked patch lies outside the clip range");
  }
}

inline Tensor clipped_sum(const Tensor& x, const Tensor& delta, const AttackConfig& cfg) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i] + delta[i], cfg.clip_lo, cfg.clip_hi);
  return out;
}

inline Perturbation finalize(const Tensor& clean, const Tensor& adv, Tensor delta, Provenance provenance) {
  Perturbation p{std::move(delta), provenance, {}};
  p.budget = perturbation_budget(clean, adv);
  return p;
}

}  // namespace detail

/// Local pixel dependency attack. Every iteration smooths the input gradient
/// of each component plane with a k x k mean filter, rescales it to unit
/// L-infinity, and steps by epsilon: ascent on the true-label loss
/// (untargeted) or descent on -log P(target) (targeted). Each iterate is
/// clipped to the valid range.
inline AttackResult lpda(const Tensor& patch, ClassId label, const PatchClassifier& model, const AttackConfig& cfg) {
  cfg.validate();
  detail::require_in_range(patch, cfg);
  const bool targeted = cfg.direction == Direction::Targeted;
  const std::size_t objective_label = targeted ? *cfg.target_class : label;
  const float sign = targeted ? -1.0f : 1.0f;

  AttackResult result;
  Tensor x = patch;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    auto [loss, grad] = model.loss_and_input_gradient(x, objective_label);
    detail::require_finite(grad, "LPDA");
    result.loss_history.push_back(loss);
    const Tensor smoothed = box_filter_planes(grad, cfg.window);
    const float peak = max_abs(smoothed);
    if (peak == 0.0f) {
      ++result.stalled_steps;
      continue;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      const float unit = smoothed[i] / peak;
      x[i] = std::clamp(x[i] + sign * cfg.epsilon * unit, cfg.clip_lo, cfg.clip_hi);
    }
  }
  result.loss_history.push_back(model.loss_and_input_gradient(x, objective_label).loss);
  result.adversarial = x;
  result.perturbation = detail::finalize(patch, x, x - patch, Provenance::Local);
  return result;
}

/// Untargeted LPDA; cfg.direction must be untargeted.
inline AttackResult lpda_untargeted(const Tensor& patch, ClassId label, const PatchClassifier& model,
                                    const AttackConfig& cfg) {
  if (cfg.direction != Direction::Untargeted) throw ArgumentError("lpda_untargeted needs an untargeted config");
  return lpda(patch, label, model, cfg);
}

/// Targeted LPDA toward `target`.
inline AttackResult lpda_targeted(const Tensor& patch, ClassId target, const PatchClassifier& model,
                                  AttackConfig cfg) {
  cfg.direction = Direction::Targeted;
  cfg.target_class = target;
  return lpda(patch, target, model, cfg);
}

/// Multiscale aggregate p ([h, w]) built from the input gradient `grad`
/// ([K, h, w]). Residual mode sums the per-plane gradient maps after
/// downsample -> upsample at every scale. Literal mode sums the full
/// upsampled planes Upsample(Downsample(x_d) + eps * Downsample(g_hat_d)),
/// image content included, with g_hat the gradient at unit L-infinity.
inline Tensor mia_aggregate(const Tensor& patch, const Tensor& grad, const AttackConfig& cfg) {
  if (patch.rank() != 3 || grad.shape() != patch.shape()) {
    throw ArgumentError("mia_aggregate expects matching [K,h,w] patch and gradient");
  }
  const std::size_t k = patch.dim(0), h = patch.dim(1), w = patch.dim(2);
  for (auto s : cfg.scales) {
    if (s < 1 || s > h || s > w) {
      throw ArgumentError("scale " + std::to_string(s) + " exceeds the patch extent " + patch.shape().to_string());
    }
  }
  Tensor unit_grad = grad;
  if (cfg.mia_mode == MiaMode::Literal) {
    const float peak = max_abs(grad);
    if (peak > 0.0f) {
      for (float& v : unit_grad.values()) v /= peak;
    } else {
      unit_grad.fill(0.0f);
    }
  }

  Tensor p(Shape{h, w});
  for (auto s : cfg.scales) {
    Tensor p_s(Shape{h, w});
    for (std::size_t d = 0; d < k; ++d) {
      Tensor plane;
      if (cfg.mia_mode == MiaMode::Residual) {
        plane = upsample(downsample(detail::plane(grad, d), s), h, w);
      } else {
        Tensor down_x = downsample(detail::plane(patch, d), s);
        const Tensor down_g = downsample(detail::plane(unit_grad, d), s);
        for (std::size_t i = 0; i < down_x.size(); ++i) down_x[i] += cfg.epsilon * down_g[i];
        plane = upsample(down_x, h, w);
      }
      for (std::size_t i = 0; i < p_s.size(); ++i) p_s[i] += plane[i];
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += p_s[i];
  }
  return p;
}

/// Multiscale information attack: one full-resolution gradient of the
/// true-label loss, aggregated across scales and component planes into a
/// spatial map p that is broadcast over every component. Residual mode uses
/// delta = eps * p / max|p|; literal mode uses delta = eps * p.
inline AttackResult mia(const Tensor& patch, ClassId label, const PatchClassifier& model, const AttackConfig& cfg) {
  cfg.validate();
  detail::require_in_range(patch, cfg);
  auto [loss, grad] = model.loss_and_input_gradient(patch, label);
  detail::require_finite(grad, "MIA");
  const Tensor p = mia_aggregate(patch, grad, cfg);

  const std::size_t k = patch.dim(0), plane = patch.dim(1) * patch.dim(2);
  Tensor delta(patch.shape());
  AttackResult result;
  if (cfg.mia_mode == MiaMode::Residual) {
    const float peak = max_abs(p);
    if (peak == 0.0f) {
      result.stalled_steps = 1;
    } else {
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < plane; ++i) delta[c * plane + i] = cfg.epsilon * (p[i] / peak);
    }
  } else {
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t i = 0; i < plane; ++i) delta[c * plane + i] = cfg.epsilon * p[i];
  }
  result.adversarial = detail::clipped_sum(patch, delta, cfg);
  result.perturbation = detail::finalize(patch, result.adversarial, std::move(delta), Provenance::Multiscale);
  return result;
}

/// delta_final = delta_local + delta_multiscale, both computed from the same
/// clean input; the adversarial input is clip(x + delta_final). The two
/// passes may use different models.
inline AttackResult combined_attack(const Tensor& patch, ClassId label, const PatchClassifier& local_model,
                                    const PatchClassifier& multiscale_model, const AttackConfig& cfg) {
  AttackResult local = lpda(patch, label, local_model, cfg);
  AttackResult multi = mia(patch, label, multiscale_model, cfg);
  Tensor delta = local.perturbation.delta + multi.perturbation.delta;

  AttackResult result;
  result.adversarial = detail::clipped_sum(patch, delta, cfg);
  result.perturbation = detail::finalize(patch, result.adversarial, std::move(delta), Provenance::Combined);
  result.loss_history = std::move(local.loss_history);
  result.stalled_steps = local.stalled_steps + multi.stalled_steps;
  result.local = std::move(local.perturbation);
  result.multiscale = std::move(multi.perturbation);
  return result;
}

inline AttackResult combined_attack(const Tensor& patch, ClassId label, const PatchClassifier& model,
                                    const AttackConfig& cfg) {
  return combined_attack(patch, label, model, model, cfg);
}

/// Single-step sign-gradient ascent: clip(x + eps * sign(grad)).
inline AttackResult sign_gradient_baseline(const Tensor& patch, ClassId label, const PatchClassifier& model,
                                           float epsilon, float clip_lo = 0.0f, float clip_hi = 1.0f) {
  AttackConfig cfg;
  cfg.epsilon = epsilon;
  cfg.clip_lo = clip_lo;
  cfg.clip_hi = clip_hi;
  cfg.validate();
  detail::require_in_range(patch, cfg);
  auto [loss, grad] = model.loss_and_input_gradient(patch, label);
  detail::require_finite(grad, "sign-gradient baseline");
  Tensor delta(patch.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (grad[i] > 0.0f) delta[i] = epsilon;
    else if (grad[i] < 0.0f) delta[i] = -epsilon;
  }
  AttackResult result;
  result.adversarial = detail::clipped_sum(patch, delta, cfg);
  result.perturbation = detail::finalize(patch, result.adversarial, std::move(delta), Provenance::Baseline);
  return result;
}

/// Dispatch by kind. AttackKind::None returns the clean patch unchanged.
inline AttackResult run_attack(AttackKind kind, const Tensor& patch, ClassId label, const PatchClassifier& model,
                               const AttackConfig& cfg) {
  switch (kind) {
    case AttackKind::None: {
      AttackResult r;
      r.adversarial = patch;
      r.perturbation = detail::finalize(patch, patch, Tensor(patch.shape()), Provenance::None);
      return r;
    }
    case AttackKind::Lpda: return lpda(patch, label, model, cfg);
    case AttackKind::Mia: return mia(patch, label, model, cfg);
    case AttackKind::Combined: return combined_attack(patch, label, model, cfg);
    case AttackKind::Baseline:
      return sign_gradient_baseline(patch, label, model, cfg.epsilon, cfg.clip_lo, cfg.clip_hi);
  }
  throw ArgumentError("unknown attack kind");
}

struct SceneAttackResult {
  std::vector<ClassId> truth;
  std::vector<ClassId> clean_pred;
  std::vector<ClassId> adv_pred;
  LabelMap clean_map;  // kUnassessed outside the attacked patches
  LabelMap adv_map;
  std::vector<Perturbation> perturbations;  // per patch, input order
  std::vector<Perturbation> local;          // combined attack only
  std::vector<Perturbation> multiscale;     // combined attack only
  PerturbationBudget total;                 // summed L0, root-sum-square L2, max L-infinity
  std::vector<std::string> failures;        // per-patch errors; those patches keep their clean prediction
};

/// Attacks every patch independently and aggregates predictions and budgets
/// in input order.
inline SceneAttackResult attack_scene(const PatchSet& patches, std::size_t height, std::size_t width,
                                      const PatchClassifier& model, const AttackConfig& cfg, AttackKind kind) {
  cfg.validate();
  if (!patches.empty() && patches.patches.front().shape() != model.contract().patch_shape()) {
    throw ConfigError("patch shape " + patches.patches.front().shape().to_string() +
                      " does not match model contract " + model.contract().patch_shape().to_string());
  }
  SceneAttackResult out;
  out.clean_map = LabelMap(height, width, kUnassessed);
  out.adv_map = LabelMap(height, width, kUnassessed);
  double l2_sq = 0.0;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const Tensor& x = patches.patches[i];
    const ClassId y = patches.labels[i];
    const ClassId clean = model.predict(x);
    ClassId adv = clean;
    try {
      AttackResult r = run_attack(kind, x, y, model, cfg);
      adv = kind == AttackKind::None ? clean : model.predict(r.adversarial);
      out.total.l0 += r.perturbation.budget.l0;
      l2_sq += r.perturbation.budget.l2 * r.perturbation.budget.l2;
      out.total.linf = std::max(out.total.linf, r.perturbation.budget.linf);
      if (r.local) out.local.push_back(std::move(*r.local));
      if (r.multiscale) out.multiscale.push_back(std::move(*r.multiscale));
      out.perturbations.push_back(std::move(r.perturbation));
    } catch (const Error& e) {
      out.failures.push_back("patch " + std::to_string(i) + ": " + e.what());
      out.perturbations.push_back(Perturbation{Tensor(x.shape()), Provenance::None, {}});
      if (kind == AttackKind::Combined) {
        out.local.push_back(out.perturbations.back());
        out.multiscale.push_back(out.perturbations.back());
      }
    }
    out.truth.push_back(y);
    out.clean_pred.push_back(clean);
    out.adv_pred.push_back(adv);
    const auto& o = patches.origins[i];
    if (o.row < height && o.col < width) {
      out.clean_map.at(o.row, o.col) = clean;
      out.adv_map.at(o.row, o.col) = adv;
    }
  }
  out.total.l2 = std::sqrt(l2_sq);
  return out;
}

}  // namespace hsia
