#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coep {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float32 array with an optional same-shape gradient slot.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor scalar(float value);
  static Tensor row(std::vector<float> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<float> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const;

  /// Size of the last axis; 1 for scalars.
  std::size_t last_dim() const;
  /// Product of all axes except the last.
  std::size_t outer_size() const;

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& at(std::size_t r, std::size_t c);
  float at(std::size_t r, std::size_t c) const;
  float item() const;

  bool has_grad() const { return grad_.has_value(); }
  std::span<float> grad();
  std::span<const float> grad() const;
  /// Allocates a zero gradient buffer if none exists and returns it.
  std::span<float> ensure_grad();
  void reset_grad() { grad_.reset(); }
  double grad_norm() const;

  bool bitwise_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<float> data_;
  std::optional<std::vector<float>> grad_;
};

}  // namespace coep
