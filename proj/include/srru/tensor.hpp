#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace srru {

/// Raised when operands disagree on a dimension. The message names the
/// offending dimension and both extents.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a forward/backward pass or optimizer step produces a
/// non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  [[nodiscard]] constexpr std::size_t size() const noexcept {
    return batch * channels * height * width;
  }
  [[nodiscard]] constexpr std::size_t plane() const noexcept { return height * width; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  std::ostringstream oss;
  oss << s.batch << "x" << s.channels << "x" << s.height << "x" << s.width;
  return oss.str();
}

inline void require_dim(std::string_view what, std::string_view dim, std::size_t expected,
                        std::size_t actual) {
  if (expected != actual) {
    std::ostringstream oss;
    oss << what << ": " << dim << " mismatch (expected " << expected << ", got " << actual << ")";
    throw ShapeError(oss.str());
  }
}

/// Dense 4-D array in batch -> channel -> row -> column order.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
      : Tensor(Shape{n, c, h, w}, fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t batch() const noexcept { return shape_.batch; }
  [[nodiscard]] std::size_t channels() const noexcept { return shape_.channels; }
  [[nodiscard]] std::size_t height() const noexcept { return shape_.height; }
  [[nodiscard]] std::size_t width() const noexcept { return shape_.width; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] std::span<T> data() noexcept { return data_; }
  [[nodiscard]] std::span<const T> data() const noexcept { return data_; }
  [[nodiscard]] std::vector<T>& storage() noexcept { return data_; }
  [[nodiscard]] const std::vector<T>& storage() const noexcept { return data_; }

  [[nodiscard]] std::size_t index(std::size_t n, std::size_t c, std::size_t h,
                                  std::size_t w) const noexcept {
    return ((n * shape_.channels + c) * shape_.height + h) * shape_.width + w;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[index(n, c, h, w)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[index(n, c, h, w)];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  /// One H x W plane.
  [[nodiscard]] std::span<T> plane(std::size_t n, std::size_t c) noexcept {
    return std::span<T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }
  [[nodiscard]] std::span<const T> plane(std::size_t n, std::size_t c) const noexcept {
    return std::span<const T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }
  /// All channels of one sample.
  [[nodiscard]] std::span<T> sample(std::size_t n) noexcept {
    const std::size_t len = shape_.channels * shape_.plane();
    return std::span<T>(data_).subspan(n * len, len);
  }
  [[nodiscard]] std::span<const T> sample(std::size_t n) const noexcept {
    const std::size_t len = shape_.channels * shape_.plane();
    return std::span<const T>(data_).subspan(n * len, len);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  [[nodiscard]] bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  [[nodiscard]] Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
Tensor<T>& operator+=(Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("dot: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  T acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace srru
