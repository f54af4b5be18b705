#pragma once

#include <cstddef>
#include <vector>

#include "inmerge/tensor.hpp"

namespace inmerge {

// Forward and backward math for each layer kind. All functions are pure;
// convolution is cross-correlation (the kernel is not flipped).

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Output extent for a sliding window; throws ShapeError unless
// (extent + 2*padding - window) is a non-negative multiple of stride.
std::size_t window_output_extent(std::size_t extent, std::size_t window,
                                 std::size_t stride, std::size_t padding);

// input [N,C_in,H,W], weight [C_out,C_in,kh,kw], bias [C_out].
Tensor conv2d_forward(const Tensor& input, const Tensor& weight,
                      const Tensor& bias, ConvGeometry geom);

struct ConvGrads {
  Tensor input;  // empty when not requested
  Tensor weight;
  Tensor bias;
};

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                          const Tensor& weight, ConvGeometry geom,
                          bool want_input_grad = true);

Tensor relu_forward(const Tensor& input);
// Gradient is zero where input <= 0.
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

struct PoolResult {
  Tensor output;
  // Flat input index of the selected element for every output element.
  std::vector<std::size_t> argmax;
};

// Ties resolve to the first element in row-major window order.
PoolResult maxpool2d_forward(const Tensor& input, std::size_t window,
                             std::size_t stride);
Tensor maxpool2d_backward(const Tensor& grad_out,
                          const std::vector<std::size_t>& argmax,
                          const Shape& input_shape);

// input [N,F_in], weight [F_out,F_in], bias [F_out].
Tensor dense_forward(const Tensor& input, const Tensor& weight,
                     const Tensor& bias);

struct DenseGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input,
                          const Tensor& weight, bool want_input_grad = true);

// [N, ...] -> [N, prod(...)]
Tensor flatten_forward(const Tensor& input);

}  // namespace inmerge
