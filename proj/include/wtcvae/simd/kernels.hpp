#pragma once

// Dense linear-algebra kernels behind the autodiff primitives.
//
// Every kernel has a portable scalar reference plus AVX2+FMA and AVX-512F
// variants. The best one is chosen at startup from CPUID and can be forced
// with the WTCVAE_ISA environment variable ("scalar", "avx2", "avx512") or
// set_isa().

#include <cstddef>
#include <string_view>

namespace wtcvae::simd {

enum class Isa { scalar, avx2, avx512 };

std::string_view isa_name(Isa isa);

// Best ISA supported by this CPU and compiled into the binary.
Isa detect_isa();

bool isa_available(Isa isa);

// ISA used by kernels<T>() with no argument.
Isa active_isa();

// Throws std::invalid_argument if the ISA is not available on this machine.
void set_isa(Isa isa);

template <class T>
struct Kernels {
  // C[m x n] += A[m x k] * B[k x n]
  // A(i, p) = a[i * a_row + p * a_col], which covers both A and A^T.
  // B and C are row-major with leading dimensions ldb and ldc.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t a_row,
               std::size_t a_col, const T* b, std::size_t ldb, T* c, std::size_t ldc);

  // Same as gemm with B(p, j) = b_rows[p][j]. Lets a stride-1 convolution
  // read shifted views of its padded input instead of an im2col copy.
  void (*gemm_rows)(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t a_row,
                    std::size_t a_col, const T* const* b_rows, T* c, std::size_t ldc);

  // C[m x n] += A * B^T with A(i, p) = a_rows[i][p] and B(j, p) = b_rows[j][p].
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* const* a_rows,
                  const T* const* b_rows, T* c, std::size_t ldc);

  T (*dot)(const T* x, const T* y, std::size_t n);

  // y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
};

template <class T>
const Kernels<T>& kernels(Isa isa);

template <class T>
const Kernels<T>& kernels() {
  return kernels<T>(active_isa());
}

namespace detail {
template <class T>
const Kernels<T>& scalar_kernels();
template <class T>
const Kernels<T>& avx2_kernels();
template <class T>
const Kernels<T>& avx512_kernels();
bool avx2_compiled();
bool avx512_compiled();
}  // namespace detail

}  // namespace wtcvae::simd
