#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace topiceq {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> data);

  static Array vector(std::initializer_list<double> values);
  static Array vector(std::vector<double> values);
  static Array scalar(double value) { return Array(Shape{}, {value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }
  double at(std::size_t row, std::size_t col) const { return data_[row * shape_[1] + col]; }

  /// Single element of a scalar or size-1 array.
  double item() const;
  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Array& a, const Array& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace topiceq
