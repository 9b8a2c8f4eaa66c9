#pragma once

#include <memory>
#include <optional>
#include <string>

#include "htr/nn/layers.hpp"

namespace htr::nn {

/// Basic two-conv residual block:
///   y = ReLU(BN(conv2(ReLU(BN(conv1(x))))) + shortcut(x))
/// The shortcut is the identity when in_ch == out_ch and stride == 1; otherwise a
/// strided 1x1 projection followed by batch norm.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock(ParamRegistry<T>& reg, const std::string& prefix, std::size_t in_ch,
                std::size_t out_ch, std::size_t stride = 1);

  void reset_parameters(RngStream& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

  bool has_projection() const { return proj_conv_.has_value(); }
  std::size_t in_channels() const { return in_ch_; }
  std::size_t out_channels() const { return out_ch_; }

 private:
  std::size_t in_ch_;
  std::size_t out_ch_;
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  ReLU<T> relu1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  std::optional<Conv2d<T>> proj_conv_;
  std::optional<BatchNorm2d<T>> proj_bn_;
  ReLU<T> relu_out_;
};

}  // namespace htr::nn
