#include "htr/core/ops.hpp"

#include <cmath>
#include <limits>

#include "htr/core/gemm.hpp"

namespace htr {

std::string_view to_string(ElementOp op) {
  switch (op) {
    case ElementOp::add: return "add";
    case ElementOp::sub: return "sub";
    case ElementOp::mul: return "mul";
    case ElementOp::max: return "max";
    case ElementOp::exp: return "exp";
    case ElementOp::log: return "log";
    case ElementOp::tanh: return "tanh";
    case ElementOp::sigmoid: return "sigmoid";
  }
  return "?";
}

bool is_binary(ElementOp op) {
  return op == ElementOp::add || op == ElementOp::sub || op == ElementOp::mul ||
         op == ElementOp::max;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul expects 2-D operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul inner dimension mismatch: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  Tensor<T> c({m, n});
  gemm<T>(Trans::no, Trans::no, m, n, k, T{1}, a.ptr(), k, b.ptr(), n, T{0}, c.ptr(), n);
  return c;
}

template <typename T>
Tensor<T> elementwise(ElementOp op, const Tensor<T>& a) {
  if (is_binary(op)) {
    throw std::invalid_argument("elementwise: op '" + std::string(to_string(op)) +
                                "' needs two operands");
  }
  Tensor<T> out = a;
  for (auto& v : out.data()) {
    switch (op) {
      case ElementOp::exp: v = std::exp(v); break;
      case ElementOp::log:
        if (!(v > T{0})) {
          throw DomainError("elementwise log of non-positive value " + std::to_string(v));
        }
        v = std::log(v);
        break;
      case ElementOp::tanh: v = std::tanh(v); break;
      case ElementOp::sigmoid: v = sigmoid(v); break;
      default: break;
    }
  }
  return out;
}

template <typename T>
Tensor<T> elementwise(ElementOp op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!is_binary(op)) {
    throw std::invalid_argument("elementwise: op '" + std::string(to_string(op)) +
                                "' is unary");
  }
  if (a.shape() != b.shape()) {
    throw ShapeError("elementwise " + std::string(to_string(op)) + " shape mismatch: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<T> out = a;
  auto o = out.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    switch (op) {
      case ElementOp::add: o[i] += y[i]; break;
      case ElementOp::sub: o[i] -= y[i]; break;
      case ElementOp::mul: o[i] *= y[i]; break;
      case ElementOp::max: o[i] = std::max(o[i], y[i]); break;
      default: break;
    }
  }
  return out;
}

template <typename T>
Tensor<T> log_masked(const Tensor<T>& a) {
  Tensor<T> out = a;
  for (auto& v : out.data()) {
    v = v > T{0} ? std::log(v) : -std::numeric_limits<T>::infinity();
  }
  return out;
}

template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> elementwise(ElementOp, const Tensor<float>&);
template Tensor<double> elementwise(ElementOp, const Tensor<double>&);
template Tensor<float> elementwise(ElementOp, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> elementwise(ElementOp, const Tensor<double>&, const Tensor<double>&);
template Tensor<float> log_masked(const Tensor<float>&);
template Tensor<double> log_masked(const Tensor<double>&);

}  // namespace htr
