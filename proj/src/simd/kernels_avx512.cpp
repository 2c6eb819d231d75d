// Compiled with -mavx512f -mfma. Same constraints as kernels_avx2.cpp.

#include "wtcvae/simd/kernels.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>

namespace wtcvae::simd::detail {
namespace {

struct F32 {
  using T = float;
  using Reg = __m512;
  using Mask = __mmask16;
  static constexpr int width = 16;
  static Reg load(const float* p) { return _mm512_loadu_ps(p); }
  static void store(float* p, Reg v) { _mm512_storeu_ps(p, v); }
  static Reg set1(float x) { return _mm512_set1_ps(x); }
  static Reg zero() { return _mm512_setzero_ps(); }
  static Reg add(Reg a, Reg b) { return _mm512_add_ps(a, b); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm512_fmadd_ps(a, b, c); }
  static Mask mask(int lanes) { return static_cast<Mask>((1u << lanes) - 1u); }
  static Reg maskload(const float* p, Mask m) { return _mm512_maskz_loadu_ps(m, p); }
  static void maskstore(float* p, Mask m, Reg v) { _mm512_mask_storeu_ps(p, m, v); }
  static float hsum(Reg v) { return _mm512_reduce_add_ps(v); }
};

struct F64 {
  using T = double;
  using Reg = __m512d;
  using Mask = __mmask8;
  static constexpr int width = 8;
  static Reg load(const double* p) { return _mm512_loadu_pd(p); }
  static void store(double* p, Reg v) { _mm512_storeu_pd(p, v); }
  static Reg set1(double x) { return _mm512_set1_pd(x); }
  static Reg zero() { return _mm512_setzero_pd(); }
  static Reg add(Reg a, Reg b) { return _mm512_add_pd(a, b); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm512_fmadd_pd(a, b, c); }
  static Mask mask(int lanes) { return static_cast<Mask>((1u << lanes) - 1u); }
  static Reg maskload(const double* p, Mask m) { return _mm512_maskz_loadu_pd(m, p); }
  static void maskstore(double* p, Mask m, Reg v) { _mm512_mask_storeu_pd(p, m, v); }
  static double hsum(Reg v) { return _mm512_reduce_add_pd(v); }
};

#include "gemm_impl.hpp"

template <class V>
Kernels<typename V::T> make() {
  // 14 x 32 floats: 28 of the 32 zmm registers hold accumulators.
  return {&gemm_impl<V, 14, 2>, &gemm_rows_impl<V, 14, 2>, &gemm_nt_impl<V, 6, 4>, &dot_impl<V>, &axpy_impl<V>};
}

}  // namespace

template <>
const Kernels<float>& avx512_kernels<float>() {
  static const Kernels<float> table = make<F32>();
  return table;
}

template <>
const Kernels<double>& avx512_kernels<double>() {
  static const Kernels<double> table = make<F64>();
  return table;
}

bool avx512_compiled() { return true; }

}  // namespace wtcvae::simd::detail

#else

namespace wtcvae::simd::detail {

template <class T>
const Kernels<T>& avx512_kernels() {
  return scalar_kernels<T>();
}

bool avx512_compiled() { return false; }

template const Kernels<float>& avx512_kernels<float>();
template const Kernels<double>& avx512_kernels<double>();

}  // namespace wtcvae::simd::detail

#endif
