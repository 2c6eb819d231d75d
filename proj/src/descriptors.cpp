#include "wtcvae/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wtcvae/fft.hpp"

namespace wtcvae {
namespace {

constexpr std::size_t kFundamentalBin = kConcatCycles;
constexpr std::size_t kHarmonics = (kSpectrumBins - 1) / kFundamentalBin;  // 300
constexpr std::size_t kHalfNeighborhood = 2;

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Spectrum amplitude_spectrum(std::span<const double> x, Window window) {
  if (x.size() != kSpectrumLength) {
    throw Error("amplitude_spectrum: expected " + std::to_string(kSpectrumLength) + " samples, got " +
                std::to_string(x.size()));
  }
  std::vector<double> buf(x.begin(), x.end());
  if (window == Window::hann) {
    const double n = static_cast<double>(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
      buf[i] *= 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
    }
  }
  const auto bins = fft::rfft(buf);
  Spectrum s;
  s.window = window;
  s.magnitudes.resize(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) s.magnitudes[k] = std::abs(bins[k]);
  return s;
}

Spectrum table_spectrum(std::span<const float> table, Window window) {
  return amplitude_spectrum(concat_cycles(table), window);
}

double spectral_centroid(const Spectrum& s) {
  double weighted = 0.0, total = 0.0;
  for (std::size_t k = 1; k < s.magnitudes.size(); ++k) {
    weighted += static_cast<double>(k) * s.magnitudes[k];
    total += s.magnitudes[k];
  }
  if (!(total > 0.0)) throw Error("spectral_centroid: all-zero spectrum");
  return weighted / total;
}

double odd_harmonic_energy_ratio(const Spectrum& s) {
  const std::size_t last = s.magnitudes.size() - 1;
  double odd = 0.0, all = 0.0;
  for (std::size_t h = 1; h <= kHarmonics; ++h) {
    const std::size_t centre = h * kFundamentalBin;
    const std::size_t lo = centre - kHalfNeighborhood;
    const std::size_t hi = std::min(centre + kHalfNeighborhood, last);
    double e = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) e += s.magnitudes[k] * s.magnitudes[k];
    all += e;
    if (h % 2 == 1) odd += e;
  }
  return all > 0.0 ? odd / all : 0.0;
}

double spectral_density(const Spectrum& s) {
  const std::size_t n = s.magnitudes.size() - 1;
  if (n == 0) return 0.0;
  double mean = 0.0;
  for (std::size_t k = 1; k <= n; ++k) mean += s.magnitudes[k];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double d = s.magnitudes[k] - mean;
    var += d * d;
  }
  return std::sqrt(var / static_cast<double>(n));
}

void LabelStats::validate() const {
  const bool ok = std::isfinite(centroid_log_min) && std::isfinite(centroid_log_max) && std::isfinite(density_min) &&
                  std::isfinite(density_max) && centroid_log_min < centroid_log_max && density_min < density_max;
  if (!ok) throw Error("degenerate stats: label normalization ranges are empty");
}

RawDescriptors describe(std::span<const float> table) {
  const Spectrum s = table_spectrum(table, Window::hann);
  return {spectral_centroid(s), odd_harmonic_energy_ratio(s), spectral_density(s)};
}

LabelStats fit_label_stats(std::span<const RawDescriptors> training) {
  if (training.empty()) throw Error("fit_label_stats: empty training split");
  LabelStats st;
  st.centroid_log_min = st.centroid_log_max = std::log(training.front().centroid);
  st.density_min = st.density_max = training.front().density;
  for (const RawDescriptors& d : training) {
    const double lc = std::log(d.centroid);
    st.centroid_log_min = std::min(st.centroid_log_min, lc);
    st.centroid_log_max = std::max(st.centroid_log_max, lc);
    st.density_min = std::min(st.density_min, d.density);
    st.density_max = std::max(st.density_max, d.density);
  }
  st.validate();
  return st;
}

LabelStats fit_label_stats(const Dataset& dataset) {
  std::vector<RawDescriptors> train;
  for (const std::size_t i : dataset.indices(Split::train)) train.push_back(describe(dataset.tables[i].samples));
  return fit_label_stats(train);
}

SemanticLabels labels_from(const RawDescriptors& d, const LabelStats& stats) {
  SemanticLabels l;
  l.bright = clip01((std::log(d.centroid) - stats.centroid_log_min) / (stats.centroid_log_max - stats.centroid_log_min));
  l.warm = clip01(d.odd_ratio);
  l.rich = clip01((d.density - stats.density_min) / (stats.density_max - stats.density_min));
  return l;
}

SemanticLabels compute_labels(std::span<const float> table, const LabelStats& stats) {
  return labels_from(describe(table), stats);
}

}  // namespace wtcvae
