#pragma once

// Amplitude spectra and the three timbre labels (bright, warm, rich).
//
// All descriptors are taken from a table repeated kConcatCycles times, so the
// fundamental sits on bin 6 of a 3600-point transform.

#include <span>
#include <vector>

#include "wtcvae/common.hpp"
#include "wtcvae/wavetable.hpp"

namespace wtcvae {

enum class Window { hann, rect };

struct Spectrum {
  std::vector<double> magnitudes;  // kSpectrumBins values, bins 0 .. 1800
  Window window = Window::rect;
};

// |DFT| of exactly kSpectrumLength samples, one-sided. The Hann window is the
// periodic (DFT-even) form, so a harmonic on bin k spreads to k-1 .. k+1 only.
Spectrum amplitude_spectrum(std::span<const double> x, Window window);

Spectrum table_spectrum(std::span<const float> table, Window window);

// Magnitude-weighted mean bin index over bins 1 .. 1800. Throws on an
// all-zero spectrum.
double spectral_centroid(const Spectrum& s);

// Fraction of harmonic energy in odd harmonics. Harmonic n collects squared
// magnitudes on bins 6n-2 .. 6n+2. Returns 0 for a spectrum with no energy.
double odd_harmonic_energy_ratio(const Spectrum& s);

// Population standard deviation of magnitudes over bins 1 .. 1800.
double spectral_density(const Spectrum& s);

// Min-max bounds fitted on the training split.
struct LabelStats {
  double centroid_log_min = 0.0;
  double centroid_log_max = 1.0;
  double density_min = 0.0;
  double density_max = 1.0;

  // Throws Error("degenerate stats") unless both ranges are non-empty.
  void validate() const;
  bool operator==(const LabelStats&) const = default;
};

struct SemanticLabels {
  double bright = 0.0;
  double warm = 0.0;
  double rich = 0.0;

  double& operator[](std::size_t i) { return i == 0 ? bright : (i == 1 ? warm : rich); }
  double operator[](std::size_t i) const { return i == 0 ? bright : (i == 1 ? warm : rich); }
  bool operator==(const SemanticLabels&) const = default;
};

inline constexpr const char* kLabelNames[3] = {"bright", "warm", "rich"};

struct RawDescriptors {
  double centroid = 0.0;
  double odd_ratio = 0.0;
  double density = 0.0;
};

RawDescriptors describe(std::span<const float> table);

LabelStats fit_label_stats(std::span<const RawDescriptors> training);
LabelStats fit_label_stats(const Dataset& dataset);

SemanticLabels labels_from(const RawDescriptors& d, const LabelStats& stats);
SemanticLabels compute_labels(std::span<const float> table, const LabelStats& stats);
inline SemanticLabels compute_labels(const Wavetable& t, const LabelStats& stats) {
  return compute_labels(std::span<const float>(t.samples), stats);
}

}  // namespace wtcvae
