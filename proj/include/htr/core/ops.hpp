#pragma once

#include <cmath>
#include <string_view>

#include "htr/core/tensor.hpp"

namespace htr {

enum class ElementOp { add, sub, mul, max, exp, log, tanh, sigmoid };

std::string_view to_string(ElementOp op);
bool is_binary(ElementOp op);

/// 2-D matrix product; throws ShapeError when inner extents differ.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Unary elementwise op (exp, log, tanh, sigmoid). log throws DomainError on x <= 0.
template <typename T>
Tensor<T> elementwise(ElementOp op, const Tensor<T>& a);

/// Binary elementwise op (add, sub, mul, max) over equal shapes.
template <typename T>
Tensor<T> elementwise(ElementOp op, const Tensor<T>& a, const Tensor<T>& b);

/// log with non-positive inputs mapped to -infinity instead of raising.
template <typename T>
Tensor<T> log_masked(const Tensor<T>& a);

template <typename T>
inline T sigmoid(T x) {
  if (x >= T{0}) {
    return T{1} / (T{1} + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace htr
