// GEMM throughput on the shapes the model produces.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "wtcvae/simd/kernels.hpp"

using namespace wtcvae;

template <class F>
double best_of(int reps, F&& f) {
  double best = 1e9;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

int main() {
  const auto& k = simd::kernels<float>();
  struct S { std::size_t m, n, kk; };
  const S shapes[] = {{64, 1216, 1152}, {32, 4800, 576}, {16, 9600, 288}, {1, 19200, 144}, {128, 4800, 64}, {64, 9600, 32}};
  for (const S s : shapes) {
    std::vector<float> a(s.m * s.kk, 0.01f), b((s.kk + 16) * s.n, 0.02f), c(s.m * s.n);
    std::vector<const float*> rows(s.kk);
    for (std::size_t p = 0; p < s.kk; ++p) rows[p] = b.data() + p * s.n + p % 9;
    const double t = best_of(5, [&] { k.gemm_rows(s.m, s.n, s.kk, a.data(), s.kk, 1, rows.data(), c.data(), s.n); });
    // nt: C[m x kk] += A[m x n] * B[kk x n]^T
    std::vector<const float*> arows(s.m);
    for (std::size_t i = 0; i < s.m; ++i) arows[i] = c.data() + i * s.n;
    std::vector<float> c2(s.m * s.kk);
    const double t2 = best_of(5, [&] { k.gemm_nt(s.m, s.kk, s.n, arows.data(), rows.data(), c2.data(), s.kk); });
    const double macs = double(s.m) * s.n * s.kk;
    std::printf("m=%zu n=%zu k=%zu  rows %.2f GMAC/s (%.2f ms)  nt %.2f GMAC/s (%.2f ms)\n", s.m, s.n, s.kk,
                macs / t * 1e-9, t * 1e3, macs / t2 * 1e-9, t2 * 1e3);
  }
}
