#include "topiceq/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "topiceq/error.hpp"

namespace topiceq {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw Error(ErrorKind::ShapeError, "data length " + std::to_string(data_.size()) +
                                           " does not match shape " + shape_string(shape_));
  }
}

Array Array::vector(std::initializer_list<double> values) {
  return Array(Shape{values.size()}, std::vector<double>(values));
}

Array Array::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array(Shape{n}, std::move(values));
}

double Array::item() const {
  if (data_.size() != 1) throw Error(ErrorKind::ShapeError, "item() on array of shape " + shape_string(shape_));
  return data_[0];
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Array::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace topiceq
