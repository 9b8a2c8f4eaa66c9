#include "htr/nn/kernels.hpp"

namespace htr::kernels {
namespace {

struct PoolDims {
  std::size_t planes, height, width, out_h, out_w;
};

PoolDims pool_dims(const Shape& s, std::size_t wh, std::size_t ww,
                   std::size_t sh, std::size_t sw) {
  if (s.size() != 4) throw ShapeError("maxpool2d expects B x C x H x W, got " + shape_str(s));
  if (s[2] < wh || s[3] < ww) {
    throw ShapeError("maxpool2d window larger than input " + shape_str(s));
  }
  if (sh == 0 || sw == 0) throw ShapeError("maxpool2d stride must be positive");
  return {s[0] * s[1], s[2], s[3], (s[2] - wh) / sh + 1, (s[3] - ww) / sw + 1};
}

}  // namespace

template <typename T>
PoolResult<T> maxpool2d_forward(const Tensor<T>& x, std::size_t wh, std::size_t ww, std::size_t sh,
                                std::size_t sw) {
  const auto d = pool_dims(x.shape(), wh, ww, sh, sw);
  PoolResult<T> r{Tensor<T>({x.dim(0), x.dim(1), d.out_h, d.out_w}), {}};
  r.argmax.resize(r.out.size());
#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < d.planes; ++p) {
    const T* in = x.ptr() + p * d.height * d.width;
    T* out = r.out.ptr() + p * d.out_h * d.out_w;
    std::uint32_t* arg = r.argmax.data() + p * d.out_h * d.out_w;
    for (std::size_t oh = 0; oh < d.out_h; ++oh) {
      for (std::size_t ow = 0; ow < d.out_w; ++ow) {
        std::size_t best = oh * sh * d.width + ow * sw;
        T best_v = in[best];
        for (std::size_t i = 0; i < wh; ++i) {
          for (std::size_t j = 0; j < ww; ++j) {
            const std::size_t idx = (oh * sh + i) * d.width + ow * sw + j;
            if (in[idx] > best_v) {
              best_v = in[idx];
              best = idx;
            }
          }
        }
        out[oh * d.out_w + ow] = best_v;
        arg[oh * d.out_w + ow] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                             const Shape& input_shape) {
  if (grad_out.size() != argmax.size() || input_shape.size() != 4) {
    throw ShapeError("maxpool2d_backward: gradient " + shape_str(grad_out.shape()) +
                     " does not match recorded indices");
  }
  Tensor<T> gx(input_shape);
  const std::size_t planes = input_shape[0] * input_shape[1];
  const std::size_t in_plane = input_shape[2] * input_shape[3];
  const std::size_t out_plane = grad_out.size() / planes;
#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < planes; ++p) {
    T* g = gx.ptr() + p * in_plane;
    const T* go = grad_out.ptr() + p * out_plane;
    const std::uint32_t* arg = argmax.data() + p * out_plane;
    for (std::size_t i = 0; i < out_plane; ++i) g[arg[i]] += go[i];
  }
  return gx;
}

namespace reference {

template <typename T>
PoolResult<T> maxpool2d_forward(const Tensor<T>& x, std::size_t wh, std::size_t ww, std::size_t sh,
                                std::size_t sw) {
  const auto d = pool_dims(x.shape(), wh, ww, sh, sw);
  PoolResult<T> r{Tensor<T>({x.dim(0), x.dim(1), d.out_h, d.out_w}), {}};
  r.argmax.resize(r.out.size());
  std::size_t k = 0;
  for (std::size_t b = 0; b < x.dim(0); ++b)
    for (std::size_t c = 0; c < x.dim(1); ++c)
      for (std::size_t oh = 0; oh < d.out_h; ++oh)
        for (std::size_t ow = 0; ow < d.out_w; ++ow, ++k) {
          T best_v = x.at(b, c, oh * sh, ow * sw);
          std::size_t best = oh * sh * d.width + ow * sw;
          for (std::size_t i = 0; i < wh; ++i)
            for (std::size_t j = 0; j < ww; ++j) {
              const T v = x.at(b, c, oh * sh + i, ow * sw + j);
              if (v > best_v) {
                best_v = v;
                best = (oh * sh + i) * d.width + ow * sw + j;
              }
            }
          r.out[k] = best_v;
          r.argmax[k] = static_cast<std::uint32_t>(best);
        }
  return r;
}

}  // namespace reference

template PoolResult<float> maxpool2d_forward(const Tensor<float>&, std::size_t, std::size_t,
                                             std::size_t, std::size_t);
template PoolResult<double> maxpool2d_forward(const Tensor<double>&, std::size_t, std::size_t,
                                              std::size_t, std::size_t);
template Tensor<float> maxpool2d_backward(const Tensor<float>&, const std::vector<std::uint32_t>&,
                                          const Shape&);
template Tensor<double> maxpool2d_backward(const Tensor<double>&,
                                           const std::vector<std::uint32_t>&, const Shape&);
template PoolResult<float> reference::maxpool2d_forward(const Tensor<float>&, std::size_t,
                                                        std::size_t, std::size_t, std::size_t);
template PoolResult<double> reference::maxpool2d_forward(const Tensor<double>&, std::size_t,
                                                         std::size_t, std::size_t, std::size_t);

}  // namespace htr::kernels
