#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "htr/core/rng.hpp"
#include "htr/nn/kernels.hpp"
#include "htr/nn/params.hpp"

// Layers own references to their parameters in a ParamRegistry plus whatever forward
// state their backward pass needs. backward() accumulates into Parameter::grad and
// returns the gradient with respect to the layer input.
namespace htr::nn {

using kernels::ConvGeometry;

template <typename T>
class Conv2d {
 public:
  Conv2d(ParamRegistry<T>& reg, const std::string& prefix, std::size_t in_ch, std::size_t out_ch,
         std::size_t kernel, ConvGeometry geometry, bool with_bias);

  /// He-normal weights (std = sqrt(2 / fan_in)), zero bias.
  void reset_parameters(RngStream& rng);
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out, bool need_grad_x = true);

  Parameter<T>& weight() { return *weight_; }
  Parameter<T>* bias() { return bias_; }
  const ConvGeometry& geometry() const { return geometry_; }

 private:
  Parameter<T>* weight_;
  Parameter<T>* bias_ = nullptr;
  ConvGeometry geometry_;
  Tensor<T> input_;
};

struct BatchNormConfig {
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Per-channel batch normalization over (B, H, W). Train mode normalizes with batch
/// statistics and updates the running estimates; eval mode applies the running ones.
template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d(ParamRegistry<T>& reg, const std::string& prefix, std::size_t channels,
              BatchNormConfig config = {});

  void reset_parameters();
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

  Parameter<T>& gamma() { return *gamma_; }
  Parameter<T>& beta() { return *beta_; }
  Parameter<T>& running_mean() { return *running_mean_; }
  Parameter<T>& running_var() { return *running_var_; }

 private:
  Parameter<T>* gamma_;
  Parameter<T>* beta_;
  Parameter<T>* running_mean_;
  Parameter<T>* running_var_;
  BatchNormConfig config_;
  Mode mode_ = Mode::train;
  Tensor<T> x_hat_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(Tensor<T> x);
  Tensor<T> backward(Tensor<T> grad_out) const;

 private:
  std::vector<std::uint8_t> active_;
};

template <typename T>
class MaxPool2d {
 public:
  MaxPool2d(std::size_t window = 2, std::size_t stride = 2) : window_(window), stride_(stride) {}
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out) const;

 private:
  std::size_t window_;
  std::size_t stride_;
  Shape input_shape_;
  std::vector<std::uint32_t> argmax_;
};

enum class ColumnPoolMode { mean, max };

/// Collapses the height axis: B x C x H x W -> B x W x C (time = width).
template <typename T>
class ColumnPool {
 public:
  explicit ColumnPool(ColumnPoolMode mode = ColumnPoolMode::mean) : mode_(mode) {}
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out) const;

 private:
  ColumnPoolMode mode_;
  Shape input_shape_;
  std::vector<std::uint32_t> argmax_h_;
};

/// y = x W + b over the last axis; W is F x V.
template <typename T>
class Linear {
 public:
  Linear(ParamRegistry<T>& reg, const std::string& prefix, std::size_t in_features,
         std::size_t out_features);

  void reset_parameters(RngStream& rng);
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  Parameter<T>& weight() { return *weight_; }
  Parameter<T>& bias() { return *bias_; }

 private:
  Parameter<T>* weight_;
  Parameter<T>* bias_;
  Tensor<T> input_;
};

}  // namespace htr::nn
