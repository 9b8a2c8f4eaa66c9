#include <omp.h>

#include <algorithm>
#include <cstring>

#include "htr/core/gemm.hpp"
#include "htr/nn/kernels.hpp"

namespace htr::kernels {

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t pad, std::size_t stride) {
  if (stride == 0) throw ShapeError("convolution stride must be positive");
  if (in + 2 * pad < kernel) {
    throw ShapeError("kernel extent " + std::to_string(kernel) + " exceeds padded input " +
                     std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

namespace {

void check_conv_shapes(const Shape& xs, const Shape& ws) {
  if (xs.size() != 4 || ws.size() != 4) {
    throw ShapeError("conv2d expects 4-D input and weight, got " + shape_str(xs) + " and " +
                     shape_str(ws));
  }
  if (xs[1] != ws[1]) {
    throw ShapeError("conv2d channel mismatch: input " + shape_str(xs) + ", weight " + shape_str(ws));
  }
}

bool is_pointwise(std::size_t kh, std::size_t kw, const ConvGeometry& g) {
  return kh == 1 && kw == 1 && g.stride_h == 1 && g.stride_w == 1 && g.pad_h == 0 && g.pad_w == 0;
}

}  // namespace

template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel_h, std::size_t kernel_w, const ConvGeometry& g, T* col) {
  const std::size_t out_h = conv_out_extent(height, kernel_h, g.pad_h, g.stride_h);
  const std::size_t out_w = conv_out_extent(width, kernel_w, g.pad_w, g.stride_w);
  const auto pad_w = static_cast<std::ptrdiff_t>(g.pad_w);
  const auto pad_h = static_cast<std::ptrdiff_t>(g.pad_h);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = image + c * height * width;
    for (std::size_t ki = 0; ki < kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < kernel_w; ++kj) {
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride_h + ki) - pad_h;
          T* dst = col;
          col += out_w;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(dst, dst + out_w, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(ih) * width;
          const auto off = static_cast<std::ptrdiff_t>(kj) - pad_w;
          if (g.stride_w == 1) {
            // valid ow range: 0 <= ow + off < width
            const std::ptrdiff_t lo = std::min<std::ptrdiff_t>(
                std::max<std::ptrdiff_t>(0, -off), static_cast<std::ptrdiff_t>(out_w));
            const std::ptrdiff_t hi =
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_w),
                                         static_cast<std::ptrdiff_t>(width) - off);
            std::fill(dst, dst + lo, T{0});
            if (hi > lo) std::memcpy(dst + lo, src + lo + off, sizeof(T) * static_cast<std::size_t>(hi - lo));
            std::fill(dst + std::max(hi, lo), dst + out_w, T{0});
          } else {
            for (std::size_t ow = 0; ow < out_w; ++ow) {
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride_w) + off;
              dst[ow] = (iw >= 0 && iw < static_cast<std::ptrdiff_t>(width)) ? src[iw] : T{0};
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel_h, std::size_t kernel_w, const ConvGeometry& g, T* image) {
  const std::size_t out_h = conv_out_extent(height, kernel_h, g.pad_h, g.stride_h);
  const std::size_t out_w = conv_out_extent(width, kernel_w, g.pad_w, g.stride_w);
  const auto pad_w = static_cast<std::ptrdiff_t>(g.pad_w);
  const auto pad_h = static_cast<std::ptrdiff_t>(g.pad_h);
  std::fill(image, image + channels * height * width, T{0});
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = image + c * height * width;
    for (std::size_t ki = 0; ki < kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < kernel_w; ++kj) {
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride_h + ki) - pad_h;
          const T* src = col;
          col += out_w;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
          T* dst = plane + static_cast<std::size_t>(ih) * width;
          const auto off = static_cast<std::ptrdiff_t>(kj) - pad_w;
          if (g.stride_w == 1) {
            const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
            const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_w),
                                                               static_cast<std::ptrdiff_t>(width) - off);
            T* d = dst + off;
#pragma omp simd
            for (std::ptrdiff_t ow = lo; ow < hi; ++ow) d[ow] += src[ow];
            continue;
          }
          for (std::size_t ow = 0; ow < out_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride_w) + off;
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(width)) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                         const ConvGeometry& g) {
  check_conv_shapes(x.shape(), w.shape());
  const std::size_t batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  const std::size_t out_ch = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (bias && (bias->rank() != 1 || bias->dim(0) != out_ch)) {
    throw ShapeError("conv2d bias shape " + shape_str(bias->shape()) + " does not match " +
                     std::to_string(out_ch) + " filters");
  }
  const std::size_t out_h = conv_out_extent(height, kh, g.pad_h, g.stride_h);
  const std::size_t out_w = conv_out_extent(width, kw, g.pad_w, g.stride_w);
  const std::size_t plane = out_h * out_w;
  const std::size_t patch = channels * kh * kw;
  const bool pointwise = is_pointwise(kh, kw, g);

  Tensor<T> out({batch, out_ch, out_h, out_w});
#pragma omp parallel
  {
    std::vector<T> col(pointwise ? 0 : patch * plane);
#pragma omp for schedule(static)
    for (std::size_t b = 0; b < batch; ++b) {
      const T* xb = x.ptr() + b * channels * height * width;
      const T* src = xb;
      if (!pointwise) {
        im2col(xb, channels, height, width, kh, kw, g, col.data());
        src = col.data();
      }
      T* ob = out.ptr() + b * out_ch * plane;
      gemm<T>(Trans::no, Trans::no, out_ch, plane, patch, T{1}, w.ptr(), patch, src, plane, T{0},
              ob, plane);
      if (bias) {
        for (std::size_t o = 0; o < out_ch; ++o) {
          const T bv = (*bias)[o];
          T* row = ob + o * plane;
          for (std::size_t p = 0; p < plane; ++p) row[p] += bv;
        }
      }
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w,
                               const ConvGeometry& g, bool with_bias, bool need_grad_x) {
  check_conv_shapes(x.shape(), w.shape());
  const std::size_t batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  const std::size_t out_ch = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t out_h = conv_out_extent(height, kh, g.pad_h, g.stride_h);
  const std::size_t out_w = conv_out_extent(width, kw, g.pad_w, g.stride_w);
  const Shape expected{batch, out_ch, out_h, out_w};
  if (grad_out.shape() != expected) {
    throw ShapeError("conv2d_backward: grad_out " + shape_str(grad_out.shape()) +
                     " does not match forward output " + shape_str(expected));
  }
  const std::size_t plane = out_h * out_w;
  const std::size_t patch = channels * kh * kw;
  const bool pointwise = is_pointwise(kh, kw, g);

  Conv2dGrads<T> grads;
  grads.grad_w = Tensor<T>(w.shape());
  if (need_grad_x) grads.grad_x = Tensor<T>(x.shape());

  const auto max_threads = static_cast<std::size_t>(omp_get_max_threads());
  std::vector<std::vector<T>> partial(max_threads);
#pragma omp parallel
  {
    const auto tid = static_cast<std::size_t>(omp_get_thread_num());
    std::vector<T> col(pointwise ? 0 : patch * plane);
    std::vector<T> grad_col(pointwise || !need_grad_x ? 0 : patch * plane);
    auto& gw = partial[tid];
    gw.assign(w.size(), T{0});
#pragma omp for schedule(static)
    for (std::size_t b = 0; b < batch; ++b) {
      const T* xb = x.ptr() + b * channels * height * width;
      const T* gob = grad_out.ptr() + b * out_ch * plane;
      const T* src = xb;
      if (!pointwise) {
        im2col(xb, channels, height, width, kh, kw, g, col.data());
        src = col.data();
      }
      gemm<T>(Trans::no, Trans::yes, out_ch, patch, plane, T{1}, gob, plane, src, plane, T{1},
              gw.data(), patch);
      if (need_grad_x) {
        T* gxb = grads.grad_x.ptr() + b * channels * height * width;
        if (pointwise) {
          gemm<T>(Trans::yes, Trans::no, patch, plane, out_ch, T{1}, w.ptr(), patch, gob, plane,
                  T{0}, gxb, plane);
        } else {
          gemm<T>(Trans::yes, Trans::no, patch, plane, out_ch, T{1}, w.ptr(), patch, gob, plane,
                  T{0}, grad_col.data(), plane);
          col2im(grad_col.data(), channels, height, width, kh, kw, g, gxb);
        }
      }
    }
  }
  for (const auto& gw : partial) {
    if (gw.empty()) continue;
    for (std::size_t i = 0; i < gw.size(); ++i) grads.grad_w[i] += gw[i];
  }

  if (with_bias) {
    grads.grad_b = Tensor<T>({out_ch});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < out_ch; ++o) {
        const T* row = grad_out.ptr() + (b * out_ch + o) * plane;
        T acc{0};
        for (std::size_t p = 0; p < plane; ++p) acc += row[p];
        grads.grad_b[o] += acc;
      }
    }
  }
  return grads;
}

namespace reference {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                         const ConvGeometry& g) {
  check_conv_shapes(x.shape(), w.shape());
  const std::size_t batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  const std::size_t out_ch = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t out_h = conv_out_extent(height, kh, g.pad_h, g.stride_h);
  const std::size_t out_w = conv_out_extent(width, kw, g.pad_w, g.stride_w);
  Tensor<T> out({batch, out_ch, out_h, out_w});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_ch; ++o)
      for (std::size_t oh = 0; oh < out_h; ++oh)
        for (std::size_t ow = 0; ow < out_w; ++ow) {
          T acc = bias ? (*bias)[o] : T{0};
          for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t ki = 0; ki < kh; ++ki)
              for (std::size_t kj = 0; kj < kw; ++kj) {
                const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride_h + ki) -
                                static_cast<std::ptrdiff_t>(g.pad_h);
                const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride_w + kj) -
                                static_cast<std::ptrdiff_t>(g.pad_w);
                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(height) ||
                    iw >= static_cast<std::ptrdiff_t>(width))
                  continue;
                acc += x.at(b, c, ih, iw) * w.at(o, c, ki, kj);
              }
          out.at(b, o, oh, ow) = acc;
        }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w,
                               const ConvGeometry& g, bool with_bias) {
  check_conv_shapes(x.shape(), w.shape());
  const std::size_t batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  const std::size_t out_ch = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t out_h = conv_out_extent(height, kh, g.pad_h, g.stride_h);
  const std::size_t out_w = conv_out_extent(width, kw, g.pad_w, g.stride_w);
  Conv2dGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(w.shape()), {}};
  if (with_bias) grads.grad_b = Tensor<T>({out_ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_ch; ++o)
      for (std::size_t oh = 0; oh < out_h; ++oh)
        for (std::size_t ow = 0; ow < out_w; ++ow) {
          const T go = grad_out.at(b, o, oh, ow);
          if (with_bias) grads.grad_b[o] += go;
          for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t ki = 0; ki < kh; ++ki)
              for (std::size_t kj = 0; kj < kw; ++kj) {
                const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride_h + ki) -
                                static_cast<std::ptrdiff_t>(g.pad_h);
                const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride_w + kj) -
                                static_cast<std::ptrdiff_t>(g.pad_w);
                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(height) ||
                    iw >= static_cast<std::ptrdiff_t>(width))
                  continue;
                grads.grad_w.at(o, c, ki, kj) += go * x.at(b, c, ih, iw);
                grads.grad_x.at(b, c, ih, iw) += go * w.at(o, c, ki, kj);
              }
        }
  return grads;
}

}  // namespace reference

#define HTR_INSTANTIATE_CONV(T)                                                                 \
  template void im2col<T>(const T*, std::size_t, std::size_t, std::size_t, std::size_t,         \
                          std::size_t, const ConvGeometry&, T*);                                \
  template void col2im<T>(const T*, std::size_t, std::size_t, std::size_t, std::size_t,         \
                          std::size_t, const ConvGeometry&, T*);                                \
  template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,    \
                                       const ConvGeometry&);                                    \
  template Conv2dGrads<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&,                \
                                             const Tensor<T>&, const ConvGeometry&, bool, bool); \
  template Tensor<T> reference::conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&,           \
                                                  const Tensor<T>*, const ConvGeometry&);       \
  template Conv2dGrads<T> reference::conv2d_backward<T>(                                        \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const ConvGeometry&, bool);

HTR_INSTANTIATE_CONV(float)
HTR_INSTANTIATE_CONV(double)

}  // namespace htr::kernels
