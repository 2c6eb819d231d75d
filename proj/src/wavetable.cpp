#include "wtcvae/wavetable.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include "wtcvae/fft.hpp"
#include "wtcvae/wav.hpp"

namespace wtcvae {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw Error("unknown split tag: " + std::string(s));
}

std::vector<std::size_t> Dataset::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == which) out.push_back(i);
  }
  return out;
}

std::vector<double> load_single_cycle(const std::filesystem::path& path) {
  const wav::Audio audio = wav::read(path);
  if (audio.channels != 1) {
    throw Error(path.string() + ": multi-channel file (" + std::to_string(audio.channels) + " channels)");
  }
  if (audio.samples.size() < kMinCycleLength) {
    throw Error(path.string() + ": too short (" + std::to_string(audio.samples.size()) + " samples, need at least " +
                std::to_string(kMinCycleLength) + ")");
  }
  return audio.samples;
}

std::vector<double> resample_to_table(std::span<const double> samples, std::size_t target) {
  const std::size_t n = samples.size();
  if (n < kMinCycleLength) throw Error("resample_to_table: need at least 8 samples, got " + std::to_string(n));
  if (target < 2) throw Error("resample_to_table: target length must be >= 2");
  if (n == target) return {samples.begin(), samples.end()};

  const auto src = fft::rfft(samples);
  std::vector<std::complex<double>> dst(target / 2 + 1);
  const double gain = static_cast<double>(target) / static_cast<double>(n);
  const std::size_t src_nyq = n / 2;
  const std::size_t dst_nyq = target / 2;
  const bool src_has_nyq = n % 2 == 0;
  const bool dst_has_nyq = target % 2 == 0;
  const std::size_t top = std::min(src_nyq, dst_nyq);
  for (std::size_t k = 0; k <= top; ++k) {
    std::complex<double> v = src[k];
    if (k > 0 && k == src_nyq && src_has_nyq && !(k == dst_nyq && dst_has_nyq)) {
      // A real cosine at the source Nyquist splits evenly into +k and -k.
      v *= 0.5;
    } else if (k > 0 && k == dst_nyq && dst_has_nyq && !(k == src_nyq && src_has_nyq)) {
      // The destination Nyquist bin only carries the cosine part of harmonic k.
      v = std::complex<double>(2.0 * v.real(), 0.0);
    }
    dst[k] = v * gain;
  }
  std::vector<double> out = fft::irfft(dst, target);
  for (double& v : out) v /= static_cast<double>(target);
  return out;
}

Wavetable normalize_table(std::span<const double> samples, std::string name, std::size_t source_id) {
  if (samples.size() != kTableLength) {
    throw Error("normalize_table: expected " + std::to_string(kTableLength) + " samples, got " +
                std::to_string(samples.size()));
  }
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  std::vector<double> centered(samples.begin(), samples.end());
  double peak = 0.0;
  for (double& v : centered) {
    v -= mean;
    peak = std::max(peak, std::abs(v));
  }
  constexpr double kSilence = 1e-9;
  if (!(peak > kSilence)) throw Error("silent table" + (name.empty() ? std::string() : ": " + name));

  Wavetable t;
  t.name = std::move(name);
  t.source_id = source_id;
  t.samples.resize(kTableLength);
  for (std::size_t i = 0; i < kTableLength; ++i) t.samples[i] = static_cast<float>(centered[i] / peak);
  return t;
}

SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.train = (n * 8) / 10;
  s.val = (n - s.train) / 2;
  s.test = n - s.train - s.val;
  return s;
}

std::vector<Split> split_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw Error("split_dataset: need at least 10 tables, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const SplitSizes sizes = split_sizes(n);
  std::vector<Split> out(n, Split::test);
  for (std::size_t r = 0; r < n; ++r) {
    out[order[r]] = r < sizes.train ? Split::train : (r < sizes.train + sizes.val ? Split::val : Split::test);
  }
  return out;
}

}  // namespace wtcvae
