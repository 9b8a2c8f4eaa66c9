#include "htr/nn/layers.hpp"

#include <cmath>

#include "htr/core/gemm.hpp"

namespace htr::nn {

// ---- Conv2d ----------------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(ParamRegistry<T>& reg, const std::string& prefix, std::size_t in_ch,
                  std::size_t out_ch, std::size_t kernel, ConvGeometry geometry, bool with_bias)
    : weight_(&reg.add(prefix + ".weight", {out_ch, in_ch, kernel, kernel})), geometry_(geometry) {
  if (with_bias) bias_ = &reg.add(prefix + ".bias", {out_ch});
}

template <typename T>
void Conv2d<T>::reset_parameters(RngStream& rng) {
  const auto& s = weight_->value.shape();
  const double fan_in = static_cast<double>(s[1] * s[2] * s[3]);
  weight_->value = rng_normal<T>(rng, s, T{0}, static_cast<T>(std::sqrt(2.0 / fan_in)));
  if (bias_) bias_->value.fill(T{0});
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return kernels::conv2d_forward(x, weight_->value, bias_ ? &bias_->value : nullptr, geometry_);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out, bool need_grad_x) {
  auto g = kernels::conv2d_backward(grad_out, input_, weight_->value, geometry_, bias_ != nullptr,
                                    need_grad_x);
  auto gw = weight_->grad.data();
  for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += g.grad_w[i];
  if (bias_) {
    for (std::size_t i = 0; i < g.grad_b.size(); ++i) bias_->grad[i] += g.grad_b[i];
  }
  return std::move(g.grad_x);
}

// ---- BatchNorm2d -----------------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(ParamRegistry<T>& reg, const std::string& prefix, std::size_t channels,
                            BatchNormConfig config)
    : gamma_(&reg.add(prefix + ".gamma", {channels})),
      beta_(&reg.add(prefix + ".beta", {channels})),
      running_mean_(&reg.add(prefix + ".running_mean", {channels}, false)),
      running_var_(&reg.add(prefix + ".running_var", {channels}, false)),
      config_(config) {
  reset_parameters();
}

template <typename T>
void BatchNorm2d<T>::reset_parameters() {
  gamma_->value.fill(T{1});
  beta_->value.fill(T{0});
  running_mean_->value.fill(T{0});
  running_var_->value.fill(T{1});
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != gamma_->value.size()) {
    throw ShapeError("batchnorm expects B x " + std::to_string(gamma_->value.size()) +
                     " x H x W, got " + shape_str(x.shape()));
  }
  mode_ = mode;
  const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  const std::size_t n = batch * plane;
  Tensor<T> y(x.shape());
  x_hat_ = Tensor<T>(x.shape());
  inv_std_.assign(channels, T{0});
  const T eps = static_cast<T>(config_.eps);

#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    T mean, var;
    if (mode == Mode::train) {
      double sum = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = x.ptr() + (b * channels + c) * plane;
#pragma omp simd reduction(+ : sum)
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      const double m = sum / static_cast<double>(n);
      double sq = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = x.ptr() + (b * channels + c) * plane;
#pragma omp simd reduction(+ : sq)
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - m;
          sq += d * d;
        }
      }
      const double v = sq / static_cast<double>(n);
      mean = static_cast<T>(m);
      var = static_cast<T>(v);
      const double mom = config_.momentum;
      const double unbiased = n > 1 ? v * static_cast<double>(n) / static_cast<double>(n - 1) : v;
      running_mean_->value[c] =
          static_cast<T>((1.0 - mom) * running_mean_->value[c] + mom * m);
      running_var_->value[c] =
          static_cast<T>((1.0 - mom) * running_var_->value[c] + mom * unbiased);
    } else {
      mean = running_mean_->value[c];
      var = running_var_->value[c];
    }
    const T inv = T{1} / std::sqrt(var + eps);
    inv_std_[c] = inv;
    const T gam = gamma_->value[c], bet = beta_->value[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      const T* p = x.ptr() + off;
      T* xh = x_hat_.ptr() + off;
      T* out = y.ptr() + off;
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (p[i] - mean) * inv;
        out[i] = gam * xh[i] + bet;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.shape() != x_hat_.shape()) {
    throw ShapeError("batchnorm backward: gradient shape " + shape_str(grad_out.shape()) +
                     " differs from forward " + shape_str(x_hat_.shape()));
  }
  const std::size_t batch = grad_out.dim(0), channels = grad_out.dim(1);
  const std::size_t plane = grad_out.dim(2) * grad_out.dim(3);
  const double n = static_cast<double>(batch * plane);
  Tensor<T> dx(grad_out.shape());

#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      const T* dy = grad_out.ptr() + off;
      const T* xh = x_hat_.ptr() + off;
#pragma omp simd reduction(+ : sum_dy, sum_dy_xhat)
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
      }
    }
    gamma_->grad[c] += static_cast<T>(sum_dy_xhat);
    beta_->grad[c] += static_cast<T>(sum_dy);
    const T scale = gamma_->value[c] * inv_std_[c];
    if (mode_ == Mode::eval) {
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t off = (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) dx[off + i] = scale * grad_out[off + i];
      }
      continue;
    }
    const T mean_dy = static_cast<T>(sum_dy / n);
    const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / n);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      const T* dy = grad_out.ptr() + off;
      const T* xh = x_hat_.ptr() + off;
      T* out = dx.ptr() + off;
      for (std::size_t i = 0; i < plane; ++i) {
        out[i] = scale * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
      }
    }
  }
  return dx;
}

// ---- ReLU ------------------------------------------------------------------------

template <typename T>
Tensor<T> ReLU<T>::forward(Tensor<T> x) {
  active_.resize(x.size());
  auto d = x.data();
  std::uint8_t* mask = active_.data();
  T* v = d.data();
  const std::size_t n = d.size();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = v[i] > T{0};
    v[i] = v[i] > T{0} ? v[i] : T{0};
  }
  return x;
}

template <typename T>
Tensor<T> ReLU<T>::backward(Tensor<T> grad_out) const {
  if (grad_out.size() != active_.size()) throw ShapeError("relu backward: size mismatch");
  auto d = grad_out.data();
  const std::uint8_t* mask = active_.data();
  T* v = d.data();
  const std::size_t n = d.size();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) v[i] = mask[i] ? v[i] : T{0};
  return grad_out;
}

// ---- MaxPool2d -------------------------------------------------------------------

template <typename T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& x) {
  input_shape_ = x.shape();
  auto r = kernels::maxpool2d_forward(x, window_, window_, stride_, stride_);
  argmax_ = std::move(r.argmax);
  return std::move(r.out);
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& grad_out) const {
  return kernels::maxpool2d_backward(grad_out, argmax_, input_shape_);
}

// ---- ColumnPool ------------------------------------------------------------------

template <typename T>
Tensor<T> ColumnPool<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("column pool expects B x C x H x W, got " + shape_str(x.shape()));
  input_shape_ = x.shape();
  const std::size_t batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  Tensor<T> y({batch, width, channels});
  if (mode_ == ColumnPoolMode::max) argmax_h_.assign(batch * width * channels, 0);
  const T inv_h = T{1} / static_cast<T>(height);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const T* p = x.ptr() + (b * channels + c) * height * width;
      for (std::size_t w = 0; w < width; ++w) {
        T acc = p[w];
        std::uint32_t arg = 0;
        for (std::size_t h = 1; h < height; ++h) {
          const T v = p[h * width + w];
          if (mode_ == ColumnPoolMode::mean) {
            acc += v;
          } else if (v > acc) {
            acc = v;
            arg = static_cast<std::uint32_t>(h);
          }
        }
        const std::size_t out_idx = (b * width + w) * channels + c;
        if (mode_ == ColumnPoolMode::mean) {
          y[out_idx] = acc * inv_h;
        } else {
          y[out_idx] = acc;
          argmax_h_[out_idx] = arg;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> ColumnPool<T>::backward(const Tensor<T>& grad_out) const {
  const std::size_t batch = input_shape_.at(0), channels = input_shape_[1];
  const std::size_t height = input_shape_[2], width = input_shape_[3];
  if (grad_out.shape() != Shape{batch, width, channels}) {
    throw ShapeError("column pool backward: unexpected gradient " + shape_str(grad_out.shape()));
  }
  Tensor<T> dx(input_shape_);
  const T inv_h = T{1} / static_cast<T>(height);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      T* p = dx.ptr() + (b * channels + c) * height * width;
      for (std::size_t w = 0; w < width; ++w) {
        const std::size_t idx = (b * width + w) * channels + c;
        const T g = grad_out[idx];
        if (mode_ == ColumnPoolMode::mean) {
          for (std::size_t h = 0; h < height; ++h) p[h * width + w] = g * inv_h;
        } else {
          p[argmax_h_[idx] * width + w] = g;
        }
      }
    }
  }
  return dx;
}

// ---- Linear ----------------------------------------------------------------------

template <typename T>
Linear<T>::Linear(ParamRegistry<T>& reg, const std::string& prefix, std::size_t in_features,
                  std::size_t out_features)
    : weight_(&reg.add(prefix + ".weight", {in_features, out_features})),
      bias_(&reg.add(prefix + ".bias", {out_features})) {}

template <typename T>
void Linear<T>::reset_parameters(RngStream& rng) {
  const auto& s = weight_->value.shape();
  weight_->value = rng_normal<T>(rng, s, T{0}, static_cast<T>(std::sqrt(2.0 / static_cast<double>(s[0]))));
  bias_->value.fill(T{0});
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  const std::size_t in = weight_->value.dim(0), out = weight_->value.dim(1);
  if (x.rank() == 0 || x.shape().back() != in) {
    throw ShapeError("linear expects trailing extent " + std::to_string(in) + ", got " +
                     shape_str(x.shape()));
  }
  input_ = x;
  const std::size_t rows = x.size() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out;
  Tensor<T> y(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(bias_->value.ptr(), bias_->value.ptr() + out, y.ptr() + r * out);
  }
  gemm<T>(Trans::no, Trans::no, rows, out, in, T{1}, x.ptr(), in, weight_->value.ptr(), out, T{1},
          y.ptr(), out);
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t in = weight_->value.dim(0), out = weight_->value.dim(1);
  const std::size_t rows = input_.size() / in;
  if (grad_out.size() != rows * out) throw ShapeError("linear backward: gradient size mismatch");
  gemm<T>(Trans::yes, Trans::no, in, out, rows, T{1}, input_.ptr(), in, grad_out.ptr(), out, T{1},
          weight_->grad.ptr(), out);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out; ++j) bias_->grad[j] += grad_out[r * out + j];
  }
  Tensor<T> dx(input_.shape());
  gemm<T>(Trans::no, Trans::yes, rows, in, out, T{1}, grad_out.ptr(), out, weight_->value.ptr(),
          out, T{0}, dx.ptr(), in);
  return dx;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class ReLU<float>;
template class ReLU<double>;
template class MaxPool2d<float>;
template class MaxPool2d<double>;
template class ColumnPool<float>;
template class ColumnPool<double>;
template class Linear<float>;
template class Linear<double>;

}  // namespace htr::nn
