#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace blprs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when tensor shapes do not fit an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out << 'x';
    out << shape[i];
  }
  return out.str();
}

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array of doubles. Every dimension is at least one.
class Tensor {
 public:
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(element_count(shape_), fill);
  }

  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape();
    if (data_.size() != element_count(shape_)) {
      throw ShapeError("tensor of shape " + to_string(shape_) + " needs " +
                       std::to_string(element_count(shape_)) + " values, got " +
                       std::to_string(data_.size()));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const& noexcept { return data_; }
  std::span<double> data() & noexcept { return data_; }
  std::span<const double> data() const&& = delete;  // would dangle
  const std::vector<double>& values() const& noexcept { return data_; }
  std::vector<double> values() && noexcept { return std::move(data_); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 (channel, row, col) access.
  double& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  /// Same contents under a new shape with the same element count.
  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void validate_shape() const {
    if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (std::size_t d : shape_) {
      if (d == 0) throw ShapeError("tensor dimension must be positive, got shape " + to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

/// Builds a tensor from explicit row-major values.
inline Tensor tensor_create(Shape shape, std::vector<double> values) {
  return Tensor(std::move(shape), std::move(values));
}

/// Builds a tensor holding a constant.
inline Tensor tensor_create(Shape shape, double fill) { return Tensor(std::move(shape), fill); }

/// Builds a tensor from a signed shape, rejecting non-positive dimensions.
inline Tensor tensor_create(std::span<const long long> dims, double fill) {
  Shape shape;
  for (long long d : dims) {
    if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + std::to_string(d));
    shape.push_back(static_cast<std::size_t>(d));
  }
  return Tensor(std::move(shape), fill);
}

}  // namespace blprs
