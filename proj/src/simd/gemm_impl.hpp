#pragma once

// Register-tiled kernel bodies shared by the SIMD translation units. Include
// inside an anonymous namespace after defining a traits struct V with:
//   T, Reg, Mask, width, load, store, set1, zero, add, fmadd, mask(lanes),
//   maskload, maskstore, hsum.
// No standard library templates are used here; see kernels_avx2.cpp.

#include <cstddef>

inline std::size_t min_size(std::size_t a, std::size_t b) { return a < b ? a : b; }

constexpr std::size_t kBlockK = 256;
constexpr std::size_t kBlockN = 384;

// R x (NV * width) tile of C += A * B reading a packed B panel (kc rows of
// NV * width contiguous values).
template <class V, int R, int NV>
void tile(std::size_t kc, const typename V::T* a, std::size_t a_row, std::size_t a_col, const typename V::T* bp,
          typename V::T* c, std::size_t ldc) {
  using T = typename V::T;
  constexpr int W = V::width;
  typename V::Reg acc[R][NV];
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < NV; ++v) acc[r][v] = V::load(c + r * ldc + v * W);
  for (std::size_t p = 0; p < kc; ++p, bp += NV * W) {
    typename V::Reg bv[NV];
    for (int v = 0; v < NV; ++v) bv[v] = V::load(bp + v * W);
    const T* ap = a + p * a_col;
    for (int r = 0; r < R; ++r) {
      const typename V::Reg ar = V::set1(ap[r * a_row]);
      for (int v = 0; v < NV; ++v) acc[r][v] = V::fmadd(ar, bv[v], acc[r][v]);
    }
  }
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < NV; ++v) V::store(c + r * ldc + v * W, acc[r][v]);
}

template <class V>
using TileFn = void (*)(std::size_t, const typename V::T*, std::size_t, std::size_t, const typename V::T*,
                        typename V::T*, std::size_t);

template <class V, int MR, int NV>
struct TileTable {
  TileFn<V> fn[MR]{};
  constexpr TileTable() { fill<1>(); }

 private:
  template <int R>
  constexpr void fill() {
    fn[R - 1] = &tile<V, R, NV>;
    if constexpr (R < MR) fill<R + 1>();
  }
};

// Copies B[0..kc) x [j0, j0 + nc) into panels of NV * width columns, zero
// padding the last panel.
template <class V, int NV>
void pack_b(std::size_t kc, std::size_t nc, const typename V::T* const* b_rows, std::size_t j0,
            typename V::T* out) {
  using T = typename V::T;
  constexpr std::size_t panel = V::width * NV;
  for (std::size_t q = 0; q < nc; q += panel) {
    const std::size_t cols = min_size(panel, nc - q);
    T* dst = out + q * kc;
    for (std::size_t p = 0; p < kc; ++p, dst += panel) {
      const T* src = b_rows[p] + j0 + q;
      std::size_t c = 0;
      for (; c < cols; ++c) dst[c] = src[c];
      for (; c < panel; ++c) dst[c] = T(0);
    }
  }
}

// One K block of at most kBlockK rows. `packed` holds kBlockK * kBlockN values.
template <class V, int MR, int NV>
void gemm_block(std::size_t m, std::size_t n, std::size_t kc, const typename V::T* a, std::size_t a_row,
                std::size_t a_col, const typename V::T* const* b_rows, typename V::T* c, std::size_t ldc,
                typename V::T* packed) {
  using T = typename V::T;
  static constexpr TileTable<V, MR, NV> table{};
  constexpr std::size_t panel = V::width * NV;
  for (std::size_t j0 = 0; j0 < n; j0 += kBlockN) {
    const std::size_t nc = min_size(kBlockN, n - j0);
    pack_b<V, NV>(kc, nc, b_rows, j0, packed);
    for (std::size_t q = 0; q < nc; q += panel) {
      const std::size_t cols = min_size(panel, nc - q);
      const T* bp = packed + q * kc;
      // Split m into equal tiles of at most MR rows (32 -> 11 + 11 + 10, not 14 + 14 + 4).
      const std::size_t tiles = (m + MR - 1) / MR;
      for (std::size_t t = 0, i = 0; t < tiles; ++t) {
        const std::size_t rows = m / tiles + (t < m % tiles ? 1 : 0);
        T* cp = c + i * ldc + j0 + q;
        const std::size_t i0 = i;
        i += rows;
        if (cols == panel) {
          table.fn[rows - 1](kc, a + i0 * a_row, a_row, a_col, bp, cp, ldc);
          continue;
        }
        // Ragged right edge: run the full tile on a scratch copy.
        T scratch[MR * panel];
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t cc = 0; cc < panel; ++cc) scratch[r * panel + cc] = cc < cols ? cp[r * ldc + cc] : T(0);
        table.fn[rows - 1](kc, a + i0 * a_row, a_row, a_col, bp, scratch, panel);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t cc = 0; cc < cols; ++cc) cp[r * ldc + cc] = scratch[r * panel + cc];
      }
    }
  }
}

template <class V>
void axpy_impl(typename V::T alpha, const typename V::T* x, typename V::T* y, std::size_t n);

// One or two output rows reuse nothing from a packed panel; stream B instead.
template <class V>
void gemm_thin(std::size_t m, std::size_t n, std::size_t k, const typename V::T* a, std::size_t a_row,
               std::size_t a_col, const typename V::T* const* b_rows, typename V::T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) axpy_impl<V>(a[i * a_row + p * a_col], b_rows[p], c + i * ldc, n);
}

constexpr std::size_t kThinRows = 2;

template <class V, int MR, int NV>
void gemm_rows_impl(std::size_t m, std::size_t n, std::size_t k, const typename V::T* a, std::size_t a_row,
                    std::size_t a_col, const typename V::T* const* b_rows, typename V::T* c, std::size_t ldc) {
  using T = typename V::T;
  if (m <= kThinRows) {
    gemm_thin<V>(m, n, k, a, a_row, a_col, b_rows, c, ldc);
    return;
  }
  T* packed = new T[kBlockK * kBlockN];
  for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
    gemm_block<V, MR, NV>(m, n, min_size(kBlockK, k - p0), a + p0 * a_col, a_row, a_col, b_rows + p0, c, ldc,
                          packed);
  }
  delete[] packed;
}

template <class V, int MR, int NV>
void gemm_impl(std::size_t m, std::size_t n, std::size_t k, const typename V::T* a, std::size_t a_row,
               std::size_t a_col, const typename V::T* b, std::size_t ldb, typename V::T* c, std::size_t ldc) {
  using T = typename V::T;
  const T* rows[kBlockK];
  T* packed = m <= kThinRows ? nullptr : new T[kBlockK * kBlockN];
  for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
    const std::size_t kc = min_size(kBlockK, k - p0);
    for (std::size_t p = 0; p < kc; ++p) rows[p] = b + (p0 + p) * ldb;
    if (packed == nullptr) {
      gemm_thin<V>(m, n, kc, a + p0 * a_col, a_row, a_col, rows, c, ldc);
    } else {
      gemm_block<V, MR, NV>(m, n, kc, a + p0 * a_col, a_row, a_col, rows, c, ldc, packed);
    }
  }
  delete[] packed;
}

// R x S block of dot products along k.
template <class V, int R, int S>
void nt_tile(std::size_t k, const typename V::T* const* a_rows, const typename V::T* const* b_rows,
             typename V::T* c, std::size_t ldc) {
  constexpr std::size_t W = V::width;
  typename V::Reg acc[R][S];
  for (int r = 0; r < R; ++r)
    for (int s = 0; s < S; ++s) acc[r][s] = V::zero();
  std::size_t p = 0;
  for (; p + W <= k; p += W) {
    typename V::Reg bv[S];
    for (int s = 0; s < S; ++s) bv[s] = V::load(b_rows[s] + p);
    for (int r = 0; r < R; ++r) {
      const typename V::Reg av = V::load(a_rows[r] + p);
      for (int s = 0; s < S; ++s) acc[r][s] = V::fmadd(av, bv[s], acc[r][s]);
    }
  }
  if (p < k) {
    const typename V::Mask m = V::mask(static_cast<int>(k - p));
    typename V::Reg bv[S];
    for (int s = 0; s < S; ++s) bv[s] = V::maskload(b_rows[s] + p, m);
    for (int r = 0; r < R; ++r) {
      const typename V::Reg av = V::maskload(a_rows[r] + p, m);
      for (int s = 0; s < S; ++s) acc[r][s] = V::fmadd(av, bv[s], acc[r][s]);
    }
  }
  for (int r = 0; r < R; ++r)
    for (int s = 0; s < S; ++s) c[r * ldc + s] += V::hsum(acc[r][s]);
}

template <class V>
using NtFn = void (*)(std::size_t, const typename V::T* const*, const typename V::T* const*, typename V::T*,
                      std::size_t);

template <class V, int MR, int NR>
struct NtTable {
  NtFn<V> fn[MR][NR]{};
  constexpr NtTable() { fill<1, 1>(); }

 private:
  template <int R, int S>
  constexpr void fill() {
    fn[R - 1][S - 1] = &nt_tile<V, R, S>;
    if constexpr (S < NR) {
      fill<R, S + 1>();
    } else if constexpr (R < MR) {
      fill<R + 1, 1>();
    }
  }
};

template <class V, int MR, int NR>
void gemm_nt_impl(std::size_t m, std::size_t n, std::size_t k, const typename V::T* const* a_rows,
                  const typename V::T* const* b_rows, typename V::T* c, std::size_t ldc) {
  static constexpr NtTable<V, MR, NR> table{};
  for (std::size_t i = 0; i < m; i += MR) {
    const int r = static_cast<int>(min_size(MR, m - i));
    for (std::size_t j = 0; j < n; j += NR) {
      const int s = static_cast<int>(min_size(NR, n - j));
      table.fn[r - 1][s - 1](k, a_rows + i, b_rows + j, c + i * ldc + j, ldc);
    }
  }
}

template <class V>
typename V::T dot_impl(const typename V::T* x, const typename V::T* y, std::size_t n) {
  constexpr std::size_t W = V::width;
  typename V::Reg s0 = V::zero(), s1 = V::zero(), s2 = V::zero(), s3 = V::zero();
  std::size_t i = 0;
  for (; i + 4 * W <= n; i += 4 * W) {
    s0 = V::fmadd(V::load(x + i), V::load(y + i), s0);
    s1 = V::fmadd(V::load(x + i + W), V::load(y + i + W), s1);
    s2 = V::fmadd(V::load(x + i + 2 * W), V::load(y + i + 2 * W), s2);
    s3 = V::fmadd(V::load(x + i + 3 * W), V::load(y + i + 3 * W), s3);
  }
  for (; i + W <= n; i += W) s0 = V::fmadd(V::load(x + i), V::load(y + i), s0);
  if (i < n) {
    const typename V::Mask m = V::mask(static_cast<int>(n - i));
    s1 = V::fmadd(V::maskload(x + i, m), V::maskload(y + i, m), s1);
  }
  return V::hsum(V::add(V::add(s0, s1), V::add(s2, s3)));
}

template <class V>
void axpy_impl(typename V::T alpha, const typename V::T* x, typename V::T* y, std::size_t n) {
  constexpr std::size_t W = V::width;
  const typename V::Reg av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) V::store(y + i, V::fmadd(av, V::load(x + i), V::load(y + i)));
  if (i < n) {
    const typename V::Mask m = V::mask(static_cast<int>(n - i));
    V::maskstore(y + i, m, V::fmadd(av, V::maskload(x + i, m), V::maskload(y + i, m)));
  }
}
