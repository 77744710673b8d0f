#include "coep/numerics/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "coep/numerics/errors.hpp"

namespace coep {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor() : shape_{}, data_(1, 0.0f) {}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_str(shape_) + " does not hold " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::scalar(float value) { return Tensor(Shape{}, std::vector<float>{value}); }

Tensor Tensor::row(std::vector<float> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{1, n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<float> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::last_dim() const { return shape_.empty() ? 1 : shape_.back(); }

std::size_t Tensor::outer_size() const {
  const std::size_t last = last_dim();
  return last == 0 ? 0 : data_.size() / last;
}

float& Tensor::at(std::size_t r, std::size_t c) { return data_[r * last_dim() + c]; }

float Tensor::at(std::size_t r, std::size_t c) const { return data_[r * last_dim() + c]; }

float Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

std::span<float> Tensor::grad() {
  if (!grad_) throw GradientError("tensor has no gradient");
  return *grad_;
}

std::span<const float> Tensor::grad() const {
  if (!grad_) throw GradientError("tensor has no gradient");
  return *grad_;
}

std::span<float> Tensor::ensure_grad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0f);
  return *grad_;
}

double Tensor::grad_norm() const {
  if (!grad_) return 0.0;
  double s = 0.0;
  for (float g : *grad_) s += static_cast<double>(g) * g;
  return std::sqrt(s);
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  return shape_ == other.shape_ && data_.size() == other.data_.size() &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

}  // namespace coep
