#include "wtcvae/fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace wtcvae::fft {
namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> allocate(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n)));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// Planning is not thread-safe in FFTW; execution with new-array functions is.
Plans plans_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, Plans> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto real = allocate<double>(n);
  auto cplx = allocate<fftw_complex>(n / 2 + 1);
  Plans p;
  const int len = static_cast<int>(n);
  p.forward = fftw_plan_dft_r2c_1d(len, real.get(), cplx.get(), FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_1d(len, cplx.get(), real.get(), FFTW_ESTIMATE);
  if (p.forward == nullptr || p.inverse == nullptr) throw std::runtime_error("FFTW planning failed");
  cache.emplace(n, p);
  return p;
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("rfft of empty sequence");
  const Plans plans = plans_for(n);
  auto real = allocate<double>(n);
  auto cplx = allocate<fftw_complex>(n / 2 + 1);
  std::copy(x.begin(), x.end(), real.get());
  fftw_execute_dft_r2c(plans.forward, real.get(), cplx.get());
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {cplx[k][0], cplx[k][1]};
  return out;
}

std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n) {
  if (n == 0 || spectrum.size() != n / 2 + 1) throw std::invalid_argument("irfft: bin count does not match length");
  const Plans plans = plans_for(n);
  auto real = allocate<double>(n);
  auto cplx = allocate<fftw_complex>(n / 2 + 1);
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    cplx[k][0] = spectrum[k].real();
    cplx[k][1] = spectrum[k].imag();
  }
  cplx[0][1] = 0.0;
  if (n % 2 == 0) cplx[n / 2][1] = 0.0;
  fftw_execute_dft_c2r(plans.inverse, cplx.get(), real.get());
  return std::vector<double>(real.get(), real.get() + n);
}

}  // namespace wtcvae::fft
