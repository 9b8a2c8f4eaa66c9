#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "htr/core/tensor.hpp"

// Compute kernels behind the layers. The top-level namespace holds the production
// versions (im2col + GEMM, OpenMP over batch samples); `reference` holds direct serial
// loops that the tests use as oracles and the benchmarks use as a baseline.
namespace htr::kernels {

struct ConvGeometry {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

/// floor((in + 2 pad - k) / stride) + 1; throws ShapeError when the kernel does not fit.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t pad, std::size_t stride);

template <typename T>
struct Conv2dGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_w;
  Tensor<T> grad_b;  // empty when the convolution has no bias
};

/// x: B x C x H x W, w: O x C x kh x kw, bias: O (or nullptr).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                         const ConvGeometry& g);

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w,
                               const ConvGeometry& g, bool with_bias, bool need_grad_x = true);

template <typename T>
struct PoolResult {
  Tensor<T> out;
  std::vector<std::uint32_t> argmax;  // flat index into the input plane, per output element
};

/// Windowed max over each plane; ties go to the first (row-major lowest) index.
template <typename T>
PoolResult<T> maxpool2d_forward(const Tensor<T>& x, std::size_t window_h, std::size_t window_w,
                                std::size_t stride_h, std::size_t stride_w);

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                             const Shape& input_shape);

template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel_h, std::size_t kernel_w, const ConvGeometry& g, T* col);

template <typename T>
void col2im(const T* col, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel_h, std::size_t kernel_w, const ConvGeometry& g, T* image);

namespace reference {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                         const ConvGeometry& g);

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w,
                               const ConvGeometry& g, bool with_bias);

template <typename T>
PoolResult<T> maxpool2d_forward(const Tensor<T>& x, std::size_t window_h, std::size_t window_w,
                                std::size_t stride_h, std::size_t stride_w);

}  // namespace reference
}  // namespace htr::kernels
