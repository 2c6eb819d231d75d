// Compiled with -mavx2 -mfma. Keep this translation unit free of standard
// library templates so no AVX2-encoded inline function can leak into scalar
// call sites through COMDAT folding.

#include "wtcvae/simd/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace wtcvae::simd::detail {
namespace {

struct F32 {
  using T = float;
  using Reg = __m256;
  using Mask = __m256i;
  static constexpr int width = 8;
  static Reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, Reg v) { _mm256_storeu_ps(p, v); }
  static Reg set1(float x) { return _mm256_set1_ps(x); }
  static Reg zero() { return _mm256_setzero_ps(); }
  static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
  static Mask mask(int lanes) {
    return _mm256_cmpgt_epi32(_mm256_set1_epi32(lanes), _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7));
  }
  static Reg maskload(const float* p, Mask m) { return _mm256_maskload_ps(p, m); }
  static void maskstore(float* p, Mask m, Reg v) { _mm256_maskstore_ps(p, m, v); }
  static float hsum(Reg v) {
    __m128 lo = _mm_add_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
    __m128 sh = _mm_movehdup_ps(lo);
    lo = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, lo);
    return _mm_cvtss_f32(_mm_add_ss(lo, sh));
  }
};

struct F64 {
  using T = double;
  using Reg = __m256d;
  using Mask = __m256i;
  static constexpr int width = 4;
  static Reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, Reg v) { _mm256_storeu_pd(p, v); }
  static Reg set1(double x) { return _mm256_set1_pd(x); }
  static Reg zero() { return _mm256_setzero_pd(); }
  static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
  static Mask mask(int lanes) { return _mm256_cmpgt_epi64(_mm256_set1_epi64x(lanes), _mm256_setr_epi64x(0, 1, 2, 3)); }
  static Reg maskload(const double* p, Mask m) { return _mm256_maskload_pd(p, m); }
  static void maskstore(double* p, Mask m, Reg v) { _mm256_maskstore_pd(p, m, v); }
  static double hsum(Reg v) {
    const __m128d lo = _mm_add_pd(_mm256_castpd256_pd128(v), _mm256_extractf128_pd(v, 1));
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  }
};

#include "gemm_impl.hpp"

template <class V>
Kernels<typename V::T> make() {
  // 6 x 16 floats: 12 accumulators, 2 B loads and 6 broadcasts per step.
  return {&gemm_impl<V, 6, 2>, &gemm_rows_impl<V, 6, 2>, &gemm_nt_impl<V, 4, 3>, &dot_impl<V>, &axpy_impl<V>};
}

}  // namespace

template <>
const Kernels<float>& avx2_kernels<float>() {
  static const Kernels<float> table = make<F32>();
  return table;
}

template <>
const Kernels<double>& avx2_kernels<double>() {
  static const Kernels<double> table = make<F64>();
  return table;
}

bool avx2_compiled() { return true; }

}  // namespace wtcvae::simd::detail

#else

namespace wtcvae::simd::detail {

template <class T>
const Kernels<T>& avx2_kernels() {
  return scalar_kernels<T>();
}

bool avx2_compiled() { return false; }

template const Kernels<float>& avx2_kernels<float>();
template const Kernels<double>& avx2_kernels<double>();

}  // namespace wtcvae::simd::detail

#endif
