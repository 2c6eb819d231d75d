#pragma once

// Real-input DFT of arbitrary length, backed by FFTW.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace wtcvae::fft {

// X[k] = sum_n x[n] exp(-2 pi i k n / N) for k = 0 .. N/2. Unnormalized.
std::vector<std::complex<double>> rfft(std::span<const double> x);

// x[n] = sum over the full Hermitian spectrum of X[k] exp(+2 pi i k n / N),
// given its first n/2 + 1 bins. Unnormalized, so irfft(rfft(x), n) == n * x.
// The imaginary parts of bin 0 (and bin n/2 for even n) are ignored.
std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n);

}  // namespace wtcvae::fft
