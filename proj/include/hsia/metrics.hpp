#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsia/errors.hpp"
#include "hsia/model.hpp"
#include "hsia/tensor.hpp"

namespace hsia {

/// counts[i][j] = number of pixels with true class i predicted as class j.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  static ConfusionMatrix from_counts(std::size_t classes, std::vector<std::uint64_t> counts) {
    if (counts.size() != classes * classes) throw ArgumentError("confusion counts must be C*C");
    ConfusionMatrix m(classes);
    m.counts_ = std::move(counts);
    return m;
  }

  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
  std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * classes_ + pred]; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto v : counts_) n += v;
    return n;
  }
  std::uint64_t trace() const {
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < classes_; ++i) n += at(i, i);
    return n;
  }
  std::uint64_t row_total(std::size_t i) const {
    std::uint64_t n = 0;
    for (std::size_t j = 0; j < classes_; ++j) n += at(i, j);
    return n;
  }
  std::uint64_t col_total(std::size_t j) const {
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < classes_; ++i) n += at(i, j);
    return n;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const ClassId> truth, std::span<const ClassId> pred, std::size_t classes) {
  if (truth.size() != pred.size()) {
    throw ArgumentError("truth and prediction sizes differ: " + std::to_string(truth.size()) + " vs " +
                        std::to_string(pred.size()));
  }
  if (classes == 0) throw ArgumentError("confusion matrix needs at least one class");
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= classes || pred[i] >= classes) {
      throw ArgumentError("label out of range at position " + std::to_string(i));
    }
    ++m.at(truth[i], pred[i]);
  }
  return m;
}

inline double overall_accuracy(const ConfusionMatrix& m) {
  const auto n = m.total();
  if (n == 0) throw ArgumentError("overall accuracy of an empty confusion matrix");
  return static_cast<double>(m.trace()) / static_cast<double>(n);
}

/// Recall of each class; nullopt for classes with no samples.
inline std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& m) {
  std::vector<std::optional<double>> out(m.classes());
  for (std::size_t i = 0; i < m.classes(); ++i) {
    const auto row = m.row_total(i);
    if (row > 0) out[i] = static_cast<double>(m.at(i, i)) / static_cast<double>(row);
  }
  return out;
}

struct AverageAccuracy {
  double value = 0.0;
  std::vector<std::size_t> excluded_classes;  // rows with no samples
};

inline AverageAccuracy average_accuracy_detailed(const ConfusionMatrix& m) {
  AverageAccuracy out;
  double sum = 0.0;
  std::size_t used = 0;
  const auto per_class = per_class_accuracy(m);
  for (std::size_t i = 0; i < per_class.size(); ++i) {
    if (per_class[i]) {
      sum += *per_class[i];
      ++used;
    } else {
      out.excluded_classes.push_back(i);
    }
  }
  if (used == 0) throw ArgumentError("average accuracy with every class row empty");
  out.value = sum / static_cast<double>(used);
  return out;
}

inline double average_accuracy(const ConfusionMatrix& m) { return average_accuracy_detailed(m).value; }

inline double cohens_kappa(const ConfusionMatrix& m) {
  const auto n = m.total();
  if (n == 0) throw ArgumentError("kappa of an empty confusion matrix");
  const double total = static_cast<double>(n);
  const double po = static_cast<double>(m.trace()) / total;
  double pe = 0.0;
  for (std::size_t i = 0; i < m.classes(); ++i) {
    pe += (static_cast<double>(m.row_total(i)) / total) * (static_cast<double>(m.col_total(i)) / total);
  }
  if (pe >= 1.0) {
    if (po == 1.0) return 1.0;
    throw DegenerateMarginalsError("chance agreement is 1 while observed agreement is " + std::to_string(po));
  }
  return (po - pe) / (1.0 - pe);
}

struct PerturbationBudget {
  std::uint64_t l0 = 0;  // spatial locations where any component moved by more than tau
  double l2 = 0.0;       // Euclidean norm of the whole difference
  double linf = 0.0;     // largest absolute difference

  friend bool operator==(const PerturbationBudget&, const PerturbationBudget&) = default;
};

/// For rank >= 2 the leading axis holds components and the rest are spatial;
/// a rank-1 tensor treats every element as its own location.
inline PerturbationBudget perturbation_budget(const Tensor& clean, const Tensor& adv, double tau = 1e-8) {
  if (clean.shape() != adv.shape()) {
    throw ArgumentError("budget shapes differ: " + clean.shape().to_string() + " vs " + adv.shape().to_string());
  }
  const std::size_t comps = clean.rank() >= 2 ? clean.dim(0) : 1;
  const std::size_t locations = clean.size() / comps;
  std::vector<bool> changed(locations, false);
  PerturbationBudget b;
  double sq = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double d = static_cast<double>(adv[i]) - static_cast<double>(clean[i]);
    sq += d * d;
    b.linf = std::max(b.linf, std::abs(d));
    if (std::abs(d) > tau) changed[i % locations] = true;
  }
  b.l2 = std::sqrt(sq);
  b.l0 = static_cast<std::uint64_t>(std::count(changed.begin(), changed.end(), true));
  return b;
}

struct MetricsReport {
  ConfusionMatrix matrix;
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  std::vector<std::optional<double>> per_class;
  std::vector<std::size_t> aa_excluded_classes;
  PerturbationBudget budget;
  ClassId lesion_class = 0;
  double lesion_accuracy = 0.0;
};

inline MetricsReport lesion_report(const ConfusionMatrix& m, const PerturbationBudget& budget, ClassId lesion_class) {
  if (lesion_class >= m.classes()) throw ArgumentError("lesion class out of range");
  MetricsReport r;
  r.matrix = m;
  r.oa = overall_accuracy(m);
  const auto aa = average_accuracy_detailed(m);
  r.aa = aa.value;
  r.aa_excluded_classes = aa.excluded_classes;
  r.kappa = cohens_kappa(m);
  r.per_class = per_class_accuracy(m);
  r.budget = budget;
  r.lesion_class = lesion_class;
  if (!r.per_class[lesion_class]) {
    throw ArgumentError("lesion class " + std::to_string(lesion_class) + " has no evaluated pixels");
  }
  r.lesion_accuracy = *r.per_class[lesion_class];
  return r;
}

}  // namespace hsia
