#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hsia/errors.hpp"

namespace hsia {

/// Ordered list of positive extents. Row-major: the last axis is contiguous.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }

  std::size_t count() const noexcept {
    if (dims_.empty()) return 0;
    return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
  }

  std::string to_string() const {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) out << (i ? "," : "") << dims_[i];
    out << ']';
    return out.str();
  }

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  void validate() const {
    for (auto d : dims_) {
      if (d == 0) throw ArgumentError("tensor extents must be positive, got " + to_string());
    }
  }

  std::vector<std::size_t> dims_;
};

/// Dense row-major tensor with value semantics.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_.count(), fill) {}
  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.count()) {
      throw ArgumentError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_.to_string());
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  BasicTensor reshaped(Shape shape) const {
    if (shape.count() != data_.size()) {
      throw ConfigError("cannot reshape " + shape_.to_string() + " to " + shape.to_string());
    }
    return BasicTensor(std::move(shape), data_);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

template <typename T>
T max_abs(const BasicTensor<T>& t) {
  T m{0};
  for (T v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

template <typename T>
BasicTensor<T> operator+(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ConfigError("shape mismatch in add: " + a.shape().to_string() + " vs " + b.shape().to_string());
  }
  BasicTensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <typename T>
BasicTensor<T> operator-(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ConfigError("shape mismatch in subtract: " + a.shape().to_string() + " vs " + b.shape().to_string());
  }
  BasicTensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

template <typename T>
BasicTensor<T> clip_to_range(const BasicTensor<T>& t, T lo, T hi) {
  if (lo > hi) throw ArgumentError("clip range is empty: lo > hi");
  BasicTensor<T> out = t;
  for (T& v : out.values()) v = std::clamp(v, lo, hi);
  return out;
}

namespace detail {

inline void require_plane(const Shape& shape, const char* op) {
  if (shape.rank() != 2) {
    throw ArgumentError(std::string(op) + " expects a rank-2 field, got " + shape.to_string());
  }
}

// Copy of plane `index` of a [K, H, W] tensor.
template <typename T>
BasicTensor<T> plane(const BasicTensor<T>& t, std::size_t index) {
  const std::size_t h = t.dim(1), w = t.dim(2);
  std::vector<T> out(t.data() + index * h * w, t.data() + (index + 1) * h * w);
  return BasicTensor<T>(Shape{h, w}, std::move(out));
}

}  // namespace detail

/// Mean over the k x k window centred on each pixel, clipped to the image.
/// Divides by the number of in-bounds pixels, so constants survive at borders.
template <typename T>
BasicTensor<T> box_filter_mean(const BasicTensor<T>& field, std::size_t window) {
  detail::require_plane(field.shape(), "box_filter_mean");
  if (window == 0 || window % 2 == 0) {
    throw ArgumentError("box filter window must be odd and positive, got " + std::to_string(window));
  }
  const std::size_t h = field.dim(0), w = field.dim(1);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(window / 2);

  // Separable: row sums, then column sums of those. The clipped window is a
  // rectangle, so its count factors as row-count times column-count.
  BasicTensor<T> rows(field.shape());
  std::vector<std::size_t> col_count(w);
  for (std::size_t j = 0; j < w; ++j) {
    const auto lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(j) - r));
    const auto hi = std::min(w - 1, j + static_cast<std::size_t>(r));
    col_count[j] = hi - lo + 1;
    for (std::size_t i = 0; i < h; ++i) {
      T acc{0};
      for (std::size_t jj = lo; jj <= hi; ++jj) acc += field.at(i, jj);
      rows.at(i, j) = acc;
    }
  }
  BasicTensor<T> out(field.shape());
  for (std::size_t i = 0; i < h; ++i) {
    const auto lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(i) - r));
    const auto hi = std::min(h - 1, i + static_cast<std::size_t>(r));
    const std::size_t row_count = hi - lo + 1;
    for (std::size_t j = 0; j < w; ++j) {
      T acc{0};
      for (std::size_t ii = lo; ii <= hi; ++ii) acc += rows.at(ii, j);
      out.at(i, j) = acc / static_cast<T>(row_count * col_count[j]);
    }
  }
  return out;
}

/// box_filter_mean applied independently to every plane of a [K, H, W] tensor.
template <typename T>
BasicTensor<T> box_filter_planes(const BasicTensor<T>& t, std::size_t window) {
  if (t.rank() != 3) throw ArgumentError("box_filter_planes expects [K,H,W], got " + t.shape().to_string());
  BasicTensor<T> out(t.shape());
  const std::size_t plane_size = t.dim(1) * t.dim(2);
  for (std::size_t k = 0; k < t.dim(0); ++k) {
    auto filtered = box_filter_mean(detail::plane(t, k), window);
    std::copy(filtered.data(), filtered.data() + plane_size, out.data() + k * plane_size);
  }
  return out;
}

/// Average pooling over s x s blocks. Trailing partial blocks average only
/// their in-bounds members.
template <typename T>
BasicTensor<T> downsample(const BasicTensor<T>& band, std::size_t factor) {
  detail::require_plane(band.shape(), "downsample");
  if (factor < 1) throw ArgumentError("downsample factor must be >= 1");
  const std::size_t h = band.dim(0), w = band.dim(1);
  const std::size_t oh = (h + factor - 1) / factor, ow = (w + factor - 1) / factor;
  BasicTensor<T> out(Shape{oh, ow});
  for (std::size_t bi = 0; bi < oh; ++bi) {
    const std::size_t i0 = bi * factor, i1 = std::min(h, i0 + factor);
    for (std::size_t bj = 0; bj < ow; ++bj) {
      const std::size_t j0 = bj * factor, j1 = std::min(w, j0 + factor);
      T acc{0};
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) acc += band.at(i, j);
      out.at(bi, bj) = acc / static_cast<T>((i1 - i0) * (j1 - j0));
    }
  }
  return out;
}

/// Nearest-neighbour expansion: out[i,j] = band[floor(i*h/H), floor(j*w/W)].
template <typename T>
BasicTensor<T> upsample(const BasicTensor<T>& band, std::size_t height, std::size_t width) {
  detail::require_plane(band.shape(), "upsample");
  const std::size_t h = band.dim(0), w = band.dim(1);
  if (height < h || width < w) {
    throw ArgumentError("upsample target " + Shape{height, width}.to_string() + " is smaller than source " +
                        band.shape().to_string());
  }
  BasicTensor<T> out(Shape{height, width});
  for (std::size_t i = 0; i < height; ++i) {
    const std::size_t si = i * h / height;
    for (std::size_t j = 0; j < width; ++j) out.at(i, j) = band.at(si, j * w / width);
  }
  return out;
}

}  // namespace hsia
