#include "cimrel/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "cimrel/error.hpp"

namespace cimrel {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
  }
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  data_.assign(element_count(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const auto expected = element_count(shape_);
  if (expected != data_.size()) {
    throw ShapeError("tensor of shape " + shape_string() + " needs " + std::to_string(expected) +
                     " values, got " + std::to_string(data_.size()));
  }
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) throw ShapeError("rows() on tensor of rank " + std::to_string(rank()));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) throw ShapeError("cols() on tensor of rank " + std::to_string(rank()));
  return shape_[1];
}

std::span<const double> Tensor::row(std::size_t r) const {
  return {data_.data() + r * shape_[1], shape_[1]};
}

std::span<double> Tensor::row(std::size_t r) {
  return {data_.data() + r * shape_[1], shape_[1]};
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

}  // namespace cimrel
