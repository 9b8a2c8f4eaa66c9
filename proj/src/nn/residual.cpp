#include "htr/nn/residual.hpp"

namespace htr::nn {

template <typename T>
ResidualBlock<T>::ResidualBlock(ParamRegistry<T>& reg, const std::string& prefix, std::size_t in_ch,
                                std::size_t out_ch, std::size_t stride)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      conv1_(reg, prefix + ".conv1", in_ch, out_ch, 3, ConvGeometry{stride, stride, 1, 1}, false),
      bn1_(reg, prefix + ".bn1", out_ch),
      conv2_(reg, prefix + ".conv2", out_ch, out_ch, 3, ConvGeometry{1, 1, 1, 1}, false),
      bn2_(reg, prefix + ".bn2", out_ch) {
  if (stride == 0) throw std::invalid_argument("residual block stride must be positive");
  if (in_ch != out_ch || stride != 1) {
    proj_conv_.emplace(reg, prefix + ".proj", in_ch, out_ch, 1, ConvGeometry{stride, stride, 0, 0},
                       false);
    proj_bn_.emplace(reg, prefix + ".proj_bn", out_ch);
  }
}

template <typename T>
void ResidualBlock<T>::reset_parameters(RngStream& rng) {
  conv1_.reset_parameters(rng);
  bn1_.reset_parameters();
  conv2_.reset_parameters(rng);
  bn2_.reset_parameters();
  if (proj_conv_) {
    proj_conv_->reset_parameters(rng);
    proj_bn_->reset_parameters();
  }
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != in_ch_) {
    throw ShapeError("residual block expects " + std::to_string(in_ch_) + " input channels, got " +
                     shape_str(x.shape()));
  }
  Tensor<T> h = relu1_.forward(bn1_.forward(conv1_.forward(x), mode));
  Tensor<T> y = bn2_.forward(conv2_.forward(h), mode);
  if (proj_conv_) {
    const Tensor<T> s = proj_bn_->forward(proj_conv_->forward(x), mode);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += s[i];
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
  }
  return relu_out_.forward(std::move(y));
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& grad_out) {
  const Tensor<T> g = relu_out_.backward(grad_out);
  Tensor<T> dx = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(g)))));
  if (proj_conv_) {
    const Tensor<T> ds = proj_conv_->backward(proj_bn_->backward(g));
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += ds[i];
  } else {
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i];
  }
  return dx;
}

template class ResidualBlock<float>;
template class ResidualBlock<double>;

}  // namespace htr::nn
