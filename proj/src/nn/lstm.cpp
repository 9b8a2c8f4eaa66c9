#include "htr/nn/lstm.hpp"

#include <cmath>

#include "htr/core/gemm.hpp"
#include "htr/core/ops.hpp"

namespace htr::nn {
namespace {

// gates: B x 4h pre-activations in, post-activations out.
template <typename T>
void activate_step(std::size_t batch, std::size_t hidden, T* gates, const T* c_prev, T* c, T* tanh_c,
                   T* h) {
  for (std::size_t b = 0; b < batch; ++b) {
    T* g = gates + b * 4 * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      const T i = sigmoid(g[j]);
      const T f = sigmoid(g[hidden + j]);
      const T cand = std::tanh(g[2 * hidden + j]);
      const T o = sigmoid(g[3 * hidden + j]);
      g[j] = i;
      g[hidden + j] = f;
      g[2 * hidden + j] = cand;
      g[3 * hidden + j] = o;
      const std::size_t k = b * hidden + j;
      const T cp = c_prev ? c_prev[k] : T{0};
      c[k] = f * cp + i * cand;
      tanh_c[k] = std::tanh(c[k]);
      h[k] = o * tanh_c[k];
    }
  }
}

// dc holds dL/dc_t on entry (from the later step) and dL/dc_prev on exit.
template <typename T>
void backward_step(std::size_t batch, std::size_t hidden, const T* gates, const T* c_prev,
                   const T* tanh_c, const T* dh, T* dc, T* dgates) {
  for (std::size_t b = 0; b < batch; ++b) {
    const T* g = gates + b * 4 * hidden;
    T* dg = dgates + b * 4 * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      const std::size_t k = b * hidden + j;
      const T i = g[j], f = g[hidden + j], cand = g[2 * hidden + j], o = g[3 * hidden + j];
      const T tc = tanh_c[k];
      const T d_o = dh[k] * tc;
      const T dct = dc[k] + dh[k] * o * (T{1} - tc * tc);
      const T cp = c_prev ? c_prev[k] : T{0};
      dg[j] = dct * cand * i * (T{1} - i);
      dg[hidden + j] = dct * cp * f * (T{1} - f);
      dg[2 * hidden + j] = dct * i * (T{1} - cand * cand);
      dg[3 * hidden + j] = d_o * o * (T{1} - o);
      dc[k] = dct * f;
    }
  }
}

// B x T x F <-> T x B x F
template <typename T>
std::vector<T> swap_batch_time(const T* src, std::size_t outer, std::size_t inner, std::size_t feat) {
  std::vector<T> out(outer * inner * feat);
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t b = 0; b < inner; ++b) {
      std::copy(src + (a * inner + b) * feat, src + (a * inner + b + 1) * feat,
                out.data() + (b * outer + a) * feat);
    }
  }
  return out;
}

template <typename T>
void check_cell_shapes(const Tensor<T>& x, const Tensor<T>& h_prev, const Tensor<T>& c_prev,
                       const Tensor<T>& w_ih, const Tensor<T>& w_hh, const Tensor<T>& bias) {
  if (x.rank() != 2 || h_prev.rank() != 2 || w_ih.rank() != 2 || w_hh.rank() != 2) {
    throw ShapeError("lstm cell expects 2-D operands");
  }
  const std::size_t hidden = h_prev.dim(1);
  if (w_ih.dim(0) != 4 * hidden || w_ih.dim(1) != x.dim(1) || w_hh.dim(0) != 4 * hidden ||
      w_hh.dim(1) != hidden || bias.size() != 4 * hidden || c_prev.shape() != h_prev.shape() ||
      h_prev.dim(0) != x.dim(0)) {
    throw ShapeError("lstm cell shape mismatch: x " + shape_str(x.shape()) + ", h " +
                     shape_str(h_prev.shape()) + ", w_ih " + shape_str(w_ih.shape()) + ", w_hh " +
                     shape_str(w_hh.shape()));
  }
}

}  // namespace

template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_cell_forward(const Tensor<T>& x, const Tensor<T>& h_prev,
                                                  const Tensor<T>& c_prev, const Tensor<T>& w_ih,
                                                  const Tensor<T>& w_hh, const Tensor<T>& bias,
                                                  LstmCellCache<T>* cache) {
  check_cell_shapes(x, h_prev, c_prev, w_ih, w_hh, bias);
  const std::size_t batch = x.dim(0), in = x.dim(1), hidden = h_prev.dim(1);
  Tensor<T> gates({batch, 4 * hidden});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(bias.ptr(), bias.ptr() + 4 * hidden, gates.ptr() + b * 4 * hidden);
  }
  gemm<T>(Trans::no, Trans::yes, batch, 4 * hidden, in, T{1}, x.ptr(), in, w_ih.ptr(), in, T{1},
          gates.ptr(), 4 * hidden);
  gemm<T>(Trans::no, Trans::yes, batch, 4 * hidden, hidden, T{1}, h_prev.ptr(), hidden, w_hh.ptr(),
          hidden, T{1}, gates.ptr(), 4 * hidden);
  Tensor<T> c({batch, hidden}), h({batch, hidden}), tanh_c({batch, hidden});
  activate_step(batch, hidden, gates.ptr(), c_prev.ptr(), c.ptr(), tanh_c.ptr(), h.ptr());
  if (cache) *cache = LstmCellCache<T>{x, h_prev, c_prev, std::move(gates), std::move(tanh_c)};
  return {std::move(h), std::move(c)};
}

template <typename T>
LstmCellGrads<T> lstm_cell_backward(const Tensor<T>& dh, const Tensor<T>& dc,
                                    const LstmCellCache<T>& cache, const Tensor<T>& w_ih,
                                    const Tensor<T>& w_hh) {
  const std::size_t batch = cache.x.dim(0), in = cache.x.dim(1), hidden = cache.h_prev.dim(1);
  if (dh.shape() != cache.h_prev.shape() || dc.shape() != cache.h_prev.shape()) {
    throw ShapeError("lstm cell backward: gradient shape mismatch");
  }
  LstmCellGrads<T> g;
  Tensor<T> dgates({batch, 4 * hidden});
  g.dc_prev = dc;
  backward_step(batch, hidden, cache.gates.ptr(), cache.c_prev.ptr(), cache.tanh_c.ptr(), dh.ptr(),
                g.dc_prev.ptr(), dgates.ptr());
  g.dx = Tensor<T>({batch, in});
  g.dh_prev = Tensor<T>({batch, hidden});
  g.dw_ih = Tensor<T>({4 * hidden, in});
  g.dw_hh = Tensor<T>({4 * hidden, hidden});
  g.dbias = Tensor<T>({4 * hidden});
  gemm<T>(Trans::no, Trans::no, batch, in, 4 * hidden, T{1}, dgates.ptr(), 4 * hidden, w_ih.ptr(),
          in, T{0}, g.dx.ptr(), in);
  gemm<T>(Trans::no, Trans::no, batch, hidden, 4 * hidden, T{1}, dgates.ptr(), 4 * hidden,
          w_hh.ptr(), hidden, T{0}, g.dh_prev.ptr(), hidden);
  gemm<T>(Trans::yes, Trans::no, 4 * hidden, in, batch, T{1}, dgates.ptr(), 4 * hidden,
          cache.x.ptr(), in, T{0}, g.dw_ih.ptr(), in);
  gemm<T>(Trans::yes, Trans::no, 4 * hidden, hidden, batch, T{1}, dgates.ptr(), 4 * hidden,
          cache.h_prev.ptr(), hidden, T{0}, g.dw_hh.ptr(), hidden);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < 4 * hidden; ++j) g.dbias[j] += dgates[b * 4 * hidden + j];
  }
  return g;
}

// ---- LstmDirection ---------------------------------------------------------------

template <typename T>
LstmDirection<T>::LstmDirection(ParamRegistry<T>& reg, const std::string& prefix,
                                std::size_t input_size, std::size_t hidden, bool reverse)
    : input_size_(input_size),
      hidden_(hidden),
      reverse_(reverse),
      w_ih_(&reg.add(prefix + ".w_ih", {4 * hidden, input_size})),
      w_hh_(&reg.add(prefix + ".w_hh", {4 * hidden, hidden})),
      bias_(&reg.add(prefix + ".bias", {4 * hidden})) {}

template <typename T>
void LstmDirection<T>::reset_parameters(RngStream& rng) {
  const T a = static_cast<T>(1.0 / std::sqrt(static_cast<double>(input_size_)));
  const T b = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hidden_)));
  w_ih_->value = rng_uniform<T>(rng, w_ih_->value.shape(), -a, a);
  w_hh_->value = rng_uniform<T>(rng, w_hh_->value.shape(), -b, b);
  bias_->value.fill(T{0});
  for (std::size_t j = hidden_; j < 2 * hidden_; ++j) bias_->value[j] = T{1};
}

template <typename T>
Tensor<T> LstmDirection<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 3 || x.dim(2) != input_size_) {
    throw ShapeError("lstm expects B x T x " + std::to_string(input_size_) + ", got " +
                     shape_str(x.shape()));
  }
  input_ = x;
  const std::size_t batch = x.dim(0), steps = x.dim(1), h = hidden_, g4 = 4 * hidden_;
  const auto xs = swap_batch_time(x.ptr(), batch, steps, input_size_);  // T x B x F

  gates_.assign(steps * batch * g4, T{0});
  for (std::size_t r = 0; r < steps * batch; ++r) {
    std::copy(bias_->value.ptr(), bias_->value.ptr() + g4, gates_.data() + r * g4);
  }
  gemm<T>(Trans::no, Trans::yes, steps * batch, g4, input_size_, T{1}, xs.data(), input_size_,
          w_ih_->value.ptr(), input_size_, T{1}, gates_.data(), g4);

  cells_.assign(steps * batch * h, T{0});
  tanh_c_.assign(steps * batch * h, T{0});
  std::vector<T> hs(steps * batch * h);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse_ ? steps - 1 - s : s;
    const std::size_t tp = reverse_ ? t + 1 : t - 1;
    T* gt = gates_.data() + t * batch * g4;
    const T* c_prev = nullptr;
    if (s > 0) {
      gemm<T>(Trans::no, Trans::yes, batch, g4, h, T{1}, hs.data() + tp * batch * h, h,
              w_hh_->value.ptr(), h, T{1}, gt, g4);
      c_prev = cells_.data() + tp * batch * h;
    }
    activate_step(batch, h, gt, c_prev, cells_.data() + t * batch * h,
                  tanh_c_.data() + t * batch * h, hs.data() + t * batch * h);
  }
  output_ = Tensor<T>({batch, steps, h}, swap_batch_time(hs.data(), steps, batch, h));
  return output_;
}

template <typename T>
Tensor<T> LstmDirection<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t batch = input_.dim(0), steps = input_.dim(1), h = hidden_, g4 = 4 * hidden_;
  if (grad_out.shape() != Shape{batch, steps, h}) {
    throw ShapeError("lstm backward: unexpected gradient " + shape_str(grad_out.shape()));
  }
  const auto dys = swap_batch_time(grad_out.ptr(), batch, steps, h);     // T x B x h
  const auto hs = swap_batch_time(output_.ptr(), batch, steps, h);       // T x B x h
  const auto xs = swap_batch_time(input_.ptr(), batch, steps, input_size_);
  std::vector<T> dgates(steps * batch * g4);
  std::vector<T> dh(batch * h), dh_next(batch * h, T{0}), dc(batch * h, T{0});

  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t t = reverse_ ? steps - 1 - s : s;
    const std::size_t tp = reverse_ ? t + 1 : t - 1;
    for (std::size_t k = 0; k < batch * h; ++k) dh[k] = dys[t * batch * h + k] + dh_next[k];
    const T* c_prev = s > 0 ? cells_.data() + tp * batch * h : nullptr;
    T* dgt = dgates.data() + t * batch * g4;
    backward_step(batch, h, gates_.data() + t * batch * g4, c_prev, tanh_c_.data() + t * batch * h,
                  dh.data(), dc.data(), dgt);
    if (s > 0) {
      gemm<T>(Trans::yes, Trans::no, g4, h, batch, T{1}, dgt, g4, hs.data() + tp * batch * h, h,
              T{1}, w_hh_->grad.ptr(), h);
      gemm<T>(Trans::no, Trans::no, batch, h, g4, T{1}, dgt, g4, w_hh_->value.ptr(), h, T{0},
              dh_next.data(), h);
    }
  }
  gemm<T>(Trans::yes, Trans::no, g4, input_size_, steps * batch, T{1}, dgates.data(), g4, xs.data(),
          input_size_, T{1}, w_ih_->grad.ptr(), input_size_);
  for (std::size_t r = 0; r < steps * batch; ++r) {
    for (std::size_t j = 0; j < g4; ++j) bias_->grad[j] += dgates[r * g4 + j];
  }
  std::vector<T> dxs(steps * batch * input_size_);
  gemm<T>(Trans::no, Trans::no, steps * batch, input_size_, g4, T{1}, dgates.data(), g4,
          w_ih_->value.ptr(), input_size_, T{0}, dxs.data(), input_size_);
  return Tensor<T>({batch, steps, input_size_}, swap_batch_time(dxs.data(), steps, batch, input_size_));
}

// ---- BiLstm ----------------------------------------------------------------------

template <typename T>
BiLstm<T>::BiLstm(ParamRegistry<T>& reg, const std::string& prefix, std::size_t input_size,
                  std::size_t hidden)
    : hidden_(hidden),
      fwd_(reg, prefix + ".fwd", input_size, hidden, false),
      bwd_(reg, prefix + ".bwd", input_size, hidden, true) {}

template <typename T>
void BiLstm<T>::reset_parameters(RngStream& rng) {
  fwd_.reset_parameters(rng);
  bwd_.reset_parameters(rng);
}

template <typename T>
Tensor<T> BiLstm<T>::forward(const Tensor<T>& x) {
  const Tensor<T> a = fwd_.forward(x);
  const Tensor<T> b = bwd_.forward(x);
  const std::size_t rows = x.dim(0) * x.dim(1), h = hidden_;
  Tensor<T> y({x.dim(0), x.dim(1), 2 * h});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(a.ptr() + r * h, a.ptr() + (r + 1) * h, y.ptr() + r * 2 * h);
    std::copy(b.ptr() + r * h, b.ptr() + (r + 1) * h, y.ptr() + r * 2 * h + h);
  }
  return y;
}

template <typename T>
Tensor<T> BiLstm<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t batch = grad_out.dim(0), steps = grad_out.dim(1), h = hidden_;
  Tensor<T> ga({batch, steps, h}), gb({batch, steps, h});
  for (std::size_t r = 0; r < batch * steps; ++r) {
    std::copy(grad_out.ptr() + r * 2 * h, grad_out.ptr() + r * 2 * h + h, ga.ptr() + r * h);
    std::copy(grad_out.ptr() + r * 2 * h + h, grad_out.ptr() + (r + 1) * 2 * h, gb.ptr() + r * h);
  }
  Tensor<T> dx = fwd_.backward(ga);
  const Tensor<T> dxb = bwd_.backward(gb);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxb[i];
  return dx;
}

// ---- BiLstmStack -----------------------------------------------------------------

template <typename T>
BiLstmStack<T>::BiLstmStack(ParamRegistry<T>& reg, const std::string& prefix,
                            std::size_t input_size, std::size_t hidden, std::size_t layers)
    : hidden_(hidden) {
  layers_.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    layers_.emplace_back(reg, prefix + ".layer" + std::to_string(l), l == 0 ? input_size : 2 * hidden,
                         hidden);
  }
}

template <typename T>
void BiLstmStack<T>::reset_parameters(RngStream& rng) {
  for (auto& l : layers_) l.reset_parameters(rng);
}

template <typename T>
Tensor<T> BiLstmStack<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 3 || x.dim(1) == 0) throw ShapeError("bilstm stack expects B x T x F with T >= 1");
  Tensor<T> h = x;
  for (auto& l : layers_) h = l.forward(h);
  return h;
}

template <typename T>
Tensor<T> BiLstmStack<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
  return g;
}

std::size_t bilstm_stack_param_count(std::size_t input_size, std::size_t hidden, std::size_t layers) {
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input_size : 2 * hidden;
    total += 2 * (4 * hidden * (in + hidden) + 4 * hidden);
  }
  return total;
}

template std::pair<Tensor<float>, Tensor<float>> lstm_cell_forward(
    const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
    const Tensor<float>&, const Tensor<float>&, LstmCellCache<float>*);
template std::pair<Tensor<double>, Tensor<double>> lstm_cell_forward(
    const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
    const Tensor<double>&, const Tensor<double>&, LstmCellCache<double>*);
template LstmCellGrads<float> lstm_cell_backward(const Tensor<float>&, const Tensor<float>&,
                                                 const LstmCellCache<float>&, const Tensor<float>&,
                                                 const Tensor<float>&);
template LstmCellGrads<double> lstm_cell_backward(const Tensor<double>&, const Tensor<double>&,
                                                  const LstmCellCache<double>&,
                                                  const Tensor<double>&, const Tensor<double>&);
template class LstmDirection<float>;
template class LstmDirection<double>;
template class BiLstm<float>;
template class BiLstm<double>;
template class BiLstmStack<float>;
template class BiLstmStack<double>;

}  // namespace htr::nn
