#include "inmerge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "inmerge/error.hpp"

namespace inmerge {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor extents must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor extents must be positive");
  }
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::from(Shape shape, std::initializer_list<float> values) {
  return Tensor(std::move(shape), std::vector<float>(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                     shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(float value) {
  std::fill(data_.begin(), data_.end(), value);
}

std::span<float> Tensor::slice(std::size_t index) {
  const std::size_t stride = data_.size() / shape_.at(0);
  if (index >= shape_[0]) throw ShapeError("slice index out of range");
  return std::span<float>(data_).subspan(index * stride, stride);
}

std::span<const float> Tensor::slice(std::size_t index) const {
  const std::size_t stride = data_.size() / shape_.at(0);
  if (index >= shape_[0]) throw ShapeError("slice index out of range");
  return std::span<const float>(data_).subspan(index * stride, stride);
}

Tensor Tensor::slice_tensor(std::size_t index) const {
  auto s = slice(index);
  Shape sub(shape_.begin() + 1, shape_.end());
  if (sub.empty()) sub.push_back(1);
  return Tensor(std::move(sub), std::vector<float>(s.begin(), s.end()));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return a.size() == 0 ||
         std::memcmp(a.raw(), b.raw(), a.size() * sizeof(float)) == 0;
}

bool all_finite(std::span<const float> values) {
  for (float v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor& t, std::string_view what) {
  if (!all_finite(t.data())) {
    throw NumericError("non-finite value in " + std::string(what));
  }
}

void require_shape(const Tensor& t, const Shape& expected,
                   std::string_view what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected shape " +
                     shape_to_string(expected) + ", got " +
                     shape_to_string(t.shape()));
  }
}

}  // namespace inmerge
