#include "inmerge/layers.hpp"

#include <algorithm>

#include <Eigen/Core>

#include "inmerge/error.hpp"

namespace inmerge {
namespace {

using RowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct ConvDims {
  std::size_t n, c_in, h, w;
  std::size_t c_out, kh, kw;
  std::size_t out_h, out_w;

  std::size_t patch() const { return c_in * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

ConvDims conv_dims(const Tensor& input, const Tensor& weight,
                   ConvGeometry geom) {
  if (input.rank() != 4) throw ShapeError("conv2d: input must be rank 4");
  if (weight.rank() != 4) throw ShapeError("conv2d: weight must be rank 4");
  if (geom.stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  ConvDims d{input.dim(0),  input.dim(1),  input.dim(2),
             input.dim(3),  weight.dim(0), weight.dim(2),
             weight.dim(3), 0,             0};
  if (weight.dim(1) != d.c_in) {
    throw ShapeError("conv2d: input has " + std::to_string(d.c_in) +
                     " channels, weight expects " +
                     std::to_string(weight.dim(1)));
  }
  d.out_h = window_output_extent(d.h, d.kh, geom.stride, geom.padding);
  d.out_w = window_output_extent(d.w, d.kw, geom.stride, geom.padding);
  return d;
}

// Output columns [lo, hi) whose input column o*stride - pad + j is in range.
struct Span {
  std::size_t lo, hi;
};

Span valid_span(std::size_t out_w, std::size_t w, std::ptrdiff_t stride,
                std::ptrdiff_t pad, std::size_t j) {
  const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - pad;
  std::ptrdiff_t lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  std::ptrdiff_t hi =
      static_cast<std::ptrdiff_t>(w) - off <= 0
          ? 0
          : (static_cast<std::ptrdiff_t>(w) - off + stride - 1) / stride;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_w));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Patch matrix [C_in*kh*kw, out_h*out_w] of one sample, zero outside bounds.
void im2col(const float* plane0, const ConvDims& d, ConvGeometry geom,
            float* col) {
  const std::size_t cols = d.positions();
  const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
  const auto stride = static_cast<std::ptrdiff_t>(geom.stride);
  for (std::size_t c = 0; c < d.c_in; ++c) {
    const float* plane = plane0 + c * d.h * d.w;
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j) {
        float* out = col + ((c * d.kh + i) * d.kw + j) * cols;
        for (std::size_t y = 0; y < d.out_h; ++y) {
          float* dst = out + y * d.out_w;
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) * stride -
                                    pad + static_cast<std::ptrdiff_t>(i);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) {
            std::fill(dst, dst + d.out_w, 0.0f);
            continue;
          }
          const float* src = plane + iy * static_cast<std::ptrdiff_t>(d.w);
          const Span x = valid_span(d.out_w, d.w, stride, pad, j);
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - pad;
          std::fill(dst, dst + x.lo, 0.0f);
          if (stride == 1) {
            std::copy(src + static_cast<std::ptrdiff_t>(x.lo) + off,
                      src + static_cast<std::ptrdiff_t>(x.hi) + off, dst + x.lo);
          } else {
            for (std::size_t o = x.lo; o < x.hi; ++o) {
              dst[o] = src[static_cast<std::ptrdiff_t>(o) * stride + off];
            }
          }
          std::fill(dst + x.hi, dst + d.out_w, 0.0f);
        }
      }
    }
  }
}

void col2im(const float* col, const ConvDims& d, ConvGeometry geom,
            float* plane0) {
  const std::size_t cols = d.positions();
  const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
  const auto stride = static_cast<std::ptrdiff_t>(geom.stride);
  for (std::size_t c = 0; c < d.c_in; ++c) {
    float* plane = plane0 + c * d.h * d.w;
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j) {
        const float* in = col + ((c * d.kh + i) * d.kw + j) * cols;
        for (std::size_t y = 0; y < d.out_h; ++y) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) * stride -
                                    pad + static_cast<std::ptrdiff_t>(i);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
          float* dst = plane + iy * static_cast<std::ptrdiff_t>(d.w);
          const float* src = in + y * d.out_w;
          const Span x = valid_span(d.out_w, d.w, stride, pad, j);
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - pad;
          if (stride == 1) {
            float* base = dst + off;
            for (std::size_t o = x.lo; o < x.hi; ++o) base[o] += src[o];
          } else {
            for (std::size_t o = x.lo; o < x.hi; ++o) {
              dst[static_cast<std::ptrdiff_t>(o) * stride + off] += src[o];
            }
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t window_output_extent(std::size_t extent, std::size_t window,
                                 std::size_t stride, std::size_t padding) {
  if (window == 0 || stride == 0) {
    throw ShapeError("window and stride must be >= 1");
  }
  const std::size_t padded = extent + 2 * padding;
  if (padded < window || (padded - window) % stride != 0) {
    throw ShapeError("non-integer output extent: (" + std::to_string(extent) +
                     " + 2*" + std::to_string(padding) + " - " +
                     std::to_string(window) + ") / " + std::to_string(stride));
  }
  return (padded - window) / stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight,
                      const Tensor& bias, ConvGeometry geom) {
  const ConvDims d = conv_dims(input, weight, geom);
  require_shape(bias, {d.c_out}, "conv2d bias");

  const std::size_t in_stride = d.c_in * d.h * d.w;
  const std::size_t out_stride = d.c_out * d.positions();
  std::vector<float> col(d.patch() * d.positions());
  const ConstMatrixMap w(weight.raw(), d.c_out, d.patch());
  const ConstMatrixMap patches(col.data(), d.patch(), d.positions());
  Tensor out({d.n, d.c_out, d.out_h, d.out_w});
  for (std::size_t n = 0; n < d.n; ++n) {
    im2col(input.raw() + n * in_stride, d, geom, col.data());
    MatrixMap y(out.raw() + n * out_stride, d.c_out, d.positions());
    y.noalias() = w * patches;
    for (std::size_t o = 0; o < d.c_out; ++o) y.row(o).array() += bias[o];
  }
  require_finite(out, "conv2d output");
  return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input,
                          const Tensor& weight, ConvGeometry geom,
                          bool want_input_grad) {
  const ConvDims d = conv_dims(input, weight, geom);
  require_shape(grad_out, {d.n, d.c_out, d.out_h, d.out_w}, "conv2d grad_out");

  const std::size_t in_stride = d.c_in * d.h * d.w;
  const std::size_t out_stride = d.c_out * d.positions();
  ConvGrads grads;
  grads.bias = Tensor({d.c_out});
  for (std::size_t o = 0; o < d.c_out; ++o) {
    double sum = 0.0;
    for (std::size_t n = 0; n < d.n; ++n) {
      const float* row = grad_out.raw() + n * out_stride + o * d.positions();
      for (std::size_t k = 0; k < d.positions(); ++k) sum += row[k];
    }
    grads.bias[o] = static_cast<float>(sum);
  }

  grads.weight = Tensor(weight.shape());
  if (want_input_grad) grads.input = Tensor(input.shape());
  MatrixMap gw(grads.weight.raw(), d.c_out, d.patch());
  const ConstMatrixMap w(weight.raw(), d.c_out, d.patch());
  std::vector<float> col(d.patch() * d.positions());
  std::vector<float> grad_col(want_input_grad ? col.size() : 0);
  const ConstMatrixMap patches(col.data(), d.patch(), d.positions());
  for (std::size_t n = 0; n < d.n; ++n) {
    const ConstMatrixMap g(grad_out.raw() + n * out_stride, d.c_out,
                           d.positions());
    im2col(input.raw() + n * in_stride, d, geom, col.data());
    gw.noalias() += g * patches.transpose();
    if (want_input_grad) {
      MatrixMap(grad_col.data(), d.patch(), d.positions()).noalias() =
          w.transpose() * g;
      col2im(grad_col.data(), d, geom, grads.input.raw() + n * in_stride);
    }
  }
  return grads;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > 0.0f ? input[i] : 0.0f;
  }
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
  require_shape(grad_out, input.shape(), "relu grad_out");
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > 0.0f ? grad_out[i] : 0.0f;
  }
  return out;
}

PoolResult maxpool2d_forward(const Tensor& input, std::size_t window,
                             std::size_t stride) {
  if (input.rank() != 4) throw ShapeError("maxpool2d: input must be rank 4");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2),
                    w = input.dim(3);
  const std::size_t oh = window_output_extent(h, window, stride, 0);
  const std::size_t ow = window_output_extent(w, window, stride, 0);

  PoolResult r{Tensor({n, c, oh, ow}), {}};
  r.argmax.resize(r.output.size());
  std::size_t out_idx = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++out_idx) {
        std::size_t best = base + (y * stride) * w + x * stride;
        float best_v = input[best];
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx = base + (y * stride + i) * w + x * stride + j;
            // Strict comparison keeps the first maximum on ties.
            if (input[idx] > best_v) {
              best_v = input[idx];
              best = idx;
            }
          }
        }
        r.output[out_idx] = best_v;
        r.argmax[out_idx] = best;
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const Tensor& grad_out,
                          const std::vector<std::size_t>& argmax,
                          const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool2d_backward: argmax cache does not match grad_out");
  }
  Tensor grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= grad.size()) {
      throw ShapeError("maxpool2d_backward: argmax index out of range");
    }
    grad[argmax[i]] += grad_out[i];
  }
  return grad;
}

Tensor dense_forward(const Tensor& input, const Tensor& weight,
                     const Tensor& bias) {
  if (input.rank() != 2 || weight.rank() != 2) {
    throw ShapeError("dense: input and weight must be rank 2");
  }
  const std::size_t n = input.dim(0), f_in = input.dim(1),
                    f_out = weight.dim(0);
  if (weight.dim(1) != f_in) {
    throw ShapeError("dense: input has " + std::to_string(f_in) +
                     " features, weight expects " +
                     std::to_string(weight.dim(1)));
  }
  require_shape(bias, {f_out}, "dense bias");
  Tensor out({n, f_out});
  MatrixMap y(out.raw(), n, f_out);
  y.noalias() = ConstMatrixMap(input.raw(), n, f_in) *
                ConstMatrixMap(weight.raw(), f_out, f_in).transpose();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t o = 0; o < f_out; ++o) y(r, o) += bias[o];
  }
  require_finite(out, "dense output");
  return out;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input,
                          const Tensor& weight, bool want_input_grad) {
  if (input.rank() != 2 || weight.rank() != 2) {
    throw ShapeError("dense: input and weight must be rank 2");
  }
  const std::size_t n = input.dim(0), f_in = input.dim(1),
                    f_out = weight.dim(0);
  if (weight.dim(1) != f_in) throw ShapeError("dense: feature mismatch");
  require_shape(grad_out, {n, f_out}, "dense grad_out");

  ConstMatrixMap g(grad_out.raw(), n, f_out);
  DenseGrads grads;
  grads.weight = Tensor(weight.shape());
  MatrixMap(grads.weight.raw(), f_out, f_in).noalias() =
      g.transpose() * ConstMatrixMap(input.raw(), n, f_in);
  grads.bias = Tensor({f_out});
  for (std::size_t o = 0; o < f_out; ++o) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += g(r, o);
    grads.bias[o] = static_cast<float>(sum);
  }
  if (want_input_grad) {
    grads.input = Tensor(input.shape());
    MatrixMap(grads.input.raw(), n, f_in).noalias() =
        g * ConstMatrixMap(weight.raw(), f_out, f_in);
  }
  return grads;
}

Tensor flatten_forward(const Tensor& input) {
  if (input.rank() < 1) throw ShapeError("flatten: empty shape");
  const std::size_t n = input.dim(0);
  return input.reshaped({n, input.size() / n});
}

}  // namespace inmerge
