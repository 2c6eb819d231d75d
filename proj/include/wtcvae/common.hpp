#pragma once

#include <cstddef>
#include <stdexcept>

namespace wtcvae {

inline constexpr std::size_t kTableLength = 600;
// Tables are repeated this many times before any spectrum is taken.
inline constexpr std::size_t kConcatCycles = 6;
inline constexpr std::size_t kSpectrumLength = kTableLength * kConcatCycles;
inline constexpr std::size_t kSpectrumBins = kSpectrumLength / 2 + 1;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wtcvae
