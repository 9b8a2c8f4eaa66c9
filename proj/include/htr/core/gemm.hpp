#pragma once

#include <cstddef>

namespace htr {

enum class Trans : bool { no = false, yes = true };

/// C[m x n] = alpha * op(A) * op(B) + beta * C, all row-major.
/// op(A) is m x k, op(B) is k x n; lda/ldb/ldc are row strides of the stored matrices.
template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc);

namespace reference {

/// Triple-loop GEMM with the same contract; serial, no blocking.
template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc);

}  // namespace reference

}  // namespace htr
