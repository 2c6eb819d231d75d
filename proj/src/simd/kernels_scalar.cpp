#include "wtcvae/simd/kernels.hpp"

namespace wtcvae::simd::detail {
namespace {

template <class T>
void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t a_row,
                 std::size_t a_col, const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * a_row + p * a_col];
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <class T>
void gemm_rows_scalar(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t a_row,
                      std::size_t a_col, const T* const* b_rows, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * a_row + p * a_col];
      const T* brow = b_rows[p];
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <class T>
void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k, const T* const* a_rows,
                    const T* const* b_rows, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a_rows[i][p] * b_rows[j][p];
      c[i * ldc + j] += acc;
    }
  }
}

template <class T>
T dot_scalar(const T* x, const T* y, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
void axpy_scalar(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

template <class T>
const Kernels<T>& scalar_kernels() {
  static const Kernels<T> table{&gemm_scalar<T>, &gemm_rows_scalar<T>, &gemm_nt_scalar<T>, &dot_scalar<T>, &axpy_scalar<T>};
  return table;
}

template const Kernels<float>& scalar_kernels<float>();
template const Kernels<double>& scalar_kernels<double>();

}  // namespace wtcvae::simd::detail
