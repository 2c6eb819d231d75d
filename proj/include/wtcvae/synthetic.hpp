#pragma once

// Closed-form single cycles and a seeded synthetic corpus of them.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wtcvae/common.hpp"

namespace wtcvae {

// x[t] = sum_h amps[h-1] * sin(2 pi h t / n + phases[h-1]). Missing phases are 0.
std::vector<double> additive_cycle(std::span<const double> amps, std::span<const double> phases = {},
                                   std::size_t n = kTableLength);

std::vector<double> sine_cycle(std::size_t n = kTableLength);
// 1/h amplitudes over `harmonics` partials, all harmonics (saw) or odd only (square).
std::vector<double> saw_cycle(std::size_t harmonics, std::size_t n = kTableLength);
std::vector<double> square_cycle(std::size_t harmonics, std::size_t n = kTableLength);

struct SyntheticTable {
  std::string name;
  std::vector<double> samples;  // one cycle, length varies across the corpus
};

// Varied timbres (saw/square/pulse/triangle families, formant bumps,
// even-dominant shapes, phase modulation, mixtures) at several cycle lengths. Pure function of (n, seed).
std::vector<SyntheticTable> synthetic_corpus(std::size_t n, std::uint64_t seed);

}  // namespace wtcvae
