#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace inmerge {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major float32 array. The last axis is the fastest-varying one.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor from(Shape shape, std::initializer_list<float> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* raw() { return data_.data(); }
  const float* raw() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Same data under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  void fill(float value);

  // Contiguous slice along axis 0.
  std::span<float> slice(std::size_t index);
  std::span<const float> slice(std::size_t index) const;
  Tensor slice_tensor(std::size_t index) const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Bitwise comparison of shape and payload; distinguishes -0.0 from 0.0.
bool bit_equal(const Tensor& a, const Tensor& b);

bool all_finite(std::span<const float> values);

// Throws NumericError naming `what` when any element is NaN or infinite.
void require_finite(const Tensor& t, std::string_view what);

void require_shape(const Tensor& t, const Shape& expected,
                   std::string_view what);

}  // namespace inmerge
