#include "htr/core/gemm.hpp"

// Callers parallelize across batch samples; the product itself stays single-threaded.
#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

namespace htr {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstView = Eigen::Map<const RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <typename T>
using View = Eigen::Map<RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

template <typename T>
void eigen_gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
                std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n),
             K = static_cast<Eigen::Index>(k);
  View<T> cv(c, M, N, Eigen::OuterStride<>(static_cast<Eigen::Index>(ldc)));
  if (beta == T{0}) {
    cv.setZero();
  } else if (beta != T{1}) {
    cv *= beta;
  }
  if (m == 0 || n == 0 || k == 0) return;
  const auto sa = Eigen::OuterStride<>(static_cast<Eigen::Index>(lda));
  const auto sb = Eigen::OuterStride<>(static_cast<Eigen::Index>(ldb));
  const bool at = ta == Trans::yes, bt = tb == Trans::yes;
  ConstView<T> av(a, at ? K : M, at ? M : K, sa);
  ConstView<T> bv(b, bt ? N : K, bt ? K : N, sb);
  if (!at && !bt) cv.noalias() += alpha * av * bv;
  else if (at && !bt) cv.noalias() += alpha * av.transpose() * bv;
  else if (!at && bt) cv.noalias() += alpha * av * bv.transpose();
  else cv.noalias() += alpha * av.transpose() * bv.transpose();
}

}  // namespace

template <>
void gemm<float>(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, float alpha,
                 const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta,
                 float* c, std::size_t ldc) {
  eigen_gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
void gemm<double>(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
                  double* c, std::size_t ldc) {
  eigen_gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

namespace reference {

template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) {
        const T av = ta == Trans::yes ? a[p * lda + i] : a[i * lda + p];
        const T bv = tb == Trans::yes ? b[j * ldb + p] : b[p * ldb + j];
        acc += av * bv;
      }
      T& out = c[i * ldc + j];
      out = (beta == T{0} ? T{0} : beta * out) + alpha * acc;
    }
  }
}

template void gemm<float>(Trans, Trans, std::size_t, std::size_t, std::size_t, float, const float*,
                          std::size_t, const float*, std::size_t, float, float*, std::size_t);
template void gemm<double>(Trans, Trans, std::size_t, std::size_t, std::size_t, double,
                           const double*, std::size_t, const double*, std::size_t, double, double*,
                           std::size_t);

}  // namespace reference
}  // namespace htr
