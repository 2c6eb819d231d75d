#pragma once

// Single-cycle wavetables: loading, spectral resampling to 600 samples,
// DC removal and peak normalization, dataset splitting and cycle repetition.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wtcvae/common.hpp"

namespace wtcvae {

struct Wavetable {
  std::vector<float> samples;  // exactly kTableLength, zero mean, peak |x| == 1
  std::string name;
  std::size_t source_id = 0;
};

enum class Split : std::uint8_t { train, val, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  bool operator==(const SplitSizes&) const = default;
};

inline constexpr std::uint64_t kDefaultSplitSeed = 42;

struct Dataset {
  std::vector<Wavetable> tables;
  std::vector<Split> split;  // parallel to tables
  std::uint64_t shuffle_seed = kDefaultSplitSeed;

  std::vector<std::size_t> indices(Split which) const;
};

// Minimum accepted length of a single-cycle file.
inline constexpr std::size_t kMinCycleLength = 8;

// Decodes a mono WAV file holding one cycle. Rejects unreadable files,
// multi-channel files and files shorter than kMinCycleLength samples; the
// error message names the file.
std::vector<double> load_single_cycle(const std::filesystem::path& path);

// Band-limited resampling of exactly one period of n >= 8 samples to
// `target` samples by zero-padding or truncating its harmonic spectrum.
std::vector<double> resample_to_table(std::span<const double> samples, std::size_t target = kTableLength);

// Removes the mean and divides by the peak magnitude. Throws Error("silent
// table") when nothing remains after DC removal.
Wavetable normalize_table(std::span<const double> samples, std::string name = {}, std::size_t source_id = 0);

SplitSizes split_sizes(std::size_t n_tables);

// Seeded shuffle, then the first 80 % train, and the remainder halved into
// validation and test (validation gets the smaller half).
std::vector<Split> split_dataset(std::size_t n_tables, std::uint64_t seed = kDefaultSplitSeed);

// output[i] = samples[i mod n], length n * k.
template <class T>
std::vector<double> concat_cycles(std::span<const T> samples, std::size_t k = kConcatCycles) {
  std::vector<double> out;
  out.reserve(samples.size() * k);
  for (std::size_t c = 0; c < k; ++c) out.insert(out.end(), samples.begin(), samples.end());
  return out;
}

inline std::vector<double> concat_cycles(const Wavetable& t, std::size_t k = kConcatCycles) {
  return concat_cycles(std::span<const float>(t.samples), k);
}

}  // namespace wtcvae
