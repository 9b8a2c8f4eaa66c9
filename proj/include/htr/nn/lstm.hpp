#pragma once

#include <string>
#include <vector>

#include "htr/nn/layers.hpp"

namespace htr::nn {

// Gate layout along the 4h axis: input, forget, cell candidate, output.
//   i, f, o = sigmoid(.)   g = tanh(.)
//   c_t = f * c_prev + i * g
//   h_t = o * tanh(c_t)
// One bias vector per gate set (4h per direction-layer).

template <typename T>
struct LstmCellCache {
  Tensor<T> x;       // B x F
  Tensor<T> h_prev;  // B x h
  Tensor<T> c_prev;  // B x h
  Tensor<T> gates;   // B x 4h, post-activation
  Tensor<T> tanh_c;  // B x h
};

template <typename T>
struct LstmCellGrads {
  Tensor<T> dx;
  Tensor<T> dh_prev;
  Tensor<T> dc_prev;
  Tensor<T> dw_ih;
  Tensor<T> dw_hh;
  Tensor<T> dbias;
};

/// One LSTM step for a batch. w_ih: 4h x F, w_hh: 4h x h, bias: 4h.
/// Returns (h_t, c_t); fills `cache` when non-null.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_cell_forward(const Tensor<T>& x, const Tensor<T>& h_prev,
                                                  const Tensor<T>& c_prev, const Tensor<T>& w_ih,
                                                  const Tensor<T>& w_hh, const Tensor<T>& bias,
                                                  LstmCellCache<T>* cache = nullptr);

template <typename T>
LstmCellGrads<T> lstm_cell_backward(const Tensor<T>& dh, const Tensor<T>& dc,
                                    const LstmCellCache<T>& cache, const Tensor<T>& w_ih,
                                    const Tensor<T>& w_hh);

/// Unidirectional LSTM over B x T x F. `reverse` runs from the last time step to the
/// first; output is still indexed by original time.
template <typename T>
class LstmDirection {
 public:
  LstmDirection(ParamRegistry<T>& reg, const std::string& prefix, std::size_t input_size,
                std::size_t hidden, bool reverse);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero bias except forget gate = 1.
  void reset_parameters(RngStream& rng);
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  std::size_t hidden() const { return hidden_; }
  Parameter<T>& w_ih() { return *w_ih_; }
  Parameter<T>& w_hh() { return *w_hh_; }
  Parameter<T>& bias() { return *bias_; }

 private:
  std::size_t input_size_;
  std::size_t hidden_;
  bool reverse_;
  Parameter<T>* w_ih_;
  Parameter<T>* w_hh_;
  Parameter<T>* bias_;
  Tensor<T> input_;
  std::vector<T> gates_;   // B x T x 4h, post-activation
  std::vector<T> cells_;   // B x T x h
  std::vector<T> tanh_c_;  // B x T x h
  Tensor<T> output_;       // B x T x h
};

/// Forward-time and backward-time directions concatenated along features: B x T x 2h.
template <typename T>
class BiLstm {
 public:
  BiLstm(ParamRegistry<T>& reg, const std::string& prefix, std::size_t input_size, std::size_t hidden);

  void reset_parameters(RngStream& rng);
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  LstmDirection<T>& forward_direction() { return fwd_; }
  LstmDirection<T>& backward_direction() { return bwd_; }

 private:
  std::size_t hidden_;
  LstmDirection<T> fwd_;
  LstmDirection<T> bwd_;
};

template <typename T>
class BiLstmStack {
 public:
  BiLstmStack(ParamRegistry<T>& reg, const std::string& prefix, std::size_t input_size,
              std::size_t hidden, std::size_t layers);

  void reset_parameters(RngStream& rng);
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);
  std::size_t output_size() const { return 2 * hidden_; }

 private:
  std::size_t hidden_;
  std::vector<BiLstm<T>> layers_;
};

/// Closed-form parameter count of a stack: sum over layers of 2 * (4h (in + h) + 4h).
std::size_t bilstm_stack_param_count(std::size_t input_size, std::size_t hidden, std::size_t layers);

}  // namespace htr::nn
