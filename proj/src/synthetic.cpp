#include "wtcvae/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace wtcvae {

std::vector<double> additive_cycle(std::span<const double> amps, std::span<const double> phases, std::size_t n) {
  std::vector<double> x(n, 0.0);
  const double w = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t h = 1; h <= amps.size(); ++h) {
    const double a = amps[h - 1];
    if (a == 0.0) continue;
    const double ph = h - 1 < phases.size() ? phases[h - 1] : 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce h * t mod n first so the argument stays small and exact.
      const std::size_t idx = (h * t) % n;
      x[t] += a * std::sin(w * static_cast<double>(idx) + ph);
    }
  }
  return x;
}

std::vector<double> sine_cycle(std::size_t n) {
  const double one[] = {1.0};
  return additive_cycle(one, {}, n);
}

std::vector<double> saw_cycle(std::size_t harmonics, std::size_t n) {
  std::vector<double> amps(harmonics);
  for (std::size_t h = 1; h <= harmonics; ++h) amps[h - 1] = 1.0 / static_cast<double>(h);
  return additive_cycle(amps, {}, n);
}

std::vector<double> square_cycle(std::size_t harmonics, std::size_t n) {
  std::vector<double> amps(harmonics, 0.0);
  for (std::size_t h = 1; h <= harmonics; h += 2) amps[h - 1] = 1.0 / static_cast<double>(h);
  return additive_cycle(amps, {}, n);
}

namespace {

constexpr std::size_t kLengths[] = {256, 327, 512, 600, 1024};

enum Family { saw, odd, pulse, formant, even, phase_mod, mixture, kFamilies };
constexpr int kAdditiveFamilies = 5;
const char* const kFamilyNames[] = {"saw", "odd", "pulse", "formant", "even", "pm", "mix"};

std::vector<double> harmonic_amps(Family f, std::mt19937_64& rng, std::size_t max_h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t nh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::exp(u(rng) * std::log(static_cast<double>(max_h))))));
  std::vector<double> a(nh, 0.0);
  switch (f) {
    case saw: {
      const double slope = 0.5 + 1.7 * u(rng);
      for (std::size_t h = 1; h <= nh; ++h) a[h - 1] = std::pow(static_cast<double>(h), -slope);
      break;
    }
    case odd: {
      // Square through triangle, with a little even-harmonic leakage.
      const double slope = 0.8 + 1.4 * u(rng);
      const double leak = u(rng) < 0.5 ? 0.0 : 0.4 * u(rng);
      for (std::size_t h = 1; h <= nh; ++h) {
        const double v = std::pow(static_cast<double>(h), -slope);
        a[h - 1] = h % 2 == 1 ? v : leak * v;
      }
      break;
    }
    case pulse: {
      const double duty = 0.03 + 0.44 * u(rng);
      for (std::size_t h = 1; h <= nh; ++h) {
        const double hd = static_cast<double>(h);
        a[h - 1] = std::sin(std::numbers::pi * hd * duty) / hd;
      }
      break;
    }
    case formant: {
      const double centre = 1.0 + u(rng) * std::min<double>(40.0, static_cast<double>(nh));
      const double width = 0.7 + 6.0 * u(rng);
      const double floor_slope = 1.0 + u(rng);
      for (std::size_t h = 1; h <= nh; ++h) {
        const double hd = static_cast<double>(h);
        a[h - 1] = std::exp(-0.5 * std::pow((hd - centre) / width, 2.0)) + 0.3 * std::pow(hd, -floor_slope);
      }
      break;
    }
    case even: {
      // Octave-up organ and rectifier shapes: weak fundamental, even partials on top.
      const double slope = 0.6 + 1.4 * u(rng);
      const double fundamental = u(rng) * u(rng);
      const double leak = 0.5 * u(rng) * u(rng);
      for (std::size_t h = 1; h <= nh; ++h) {
        const double v = std::pow(static_cast<double>(h), -slope);
        a[h - 1] = h == 1 ? fundamental : h % 2 == 0 ? v : leak * v;
      }
      if (nh < 2) a.assign({fundamental, 0.5});
      break;
    }
    default:
      break;
  }
  return a;
}

std::vector<double> phase_mod_cycle(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double ratio = static_cast<double>(1 + static_cast<int>(u(rng) * 4.0));
  const double index = 4.0 * u(rng) * u(rng);
  const double feedback = u(rng) < 0.3 ? 0.5 * u(rng) : 0.0;
  std::vector<double> x(n);
  double prev = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double ph = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n);
    prev = std::sin(ph + index * std::sin(ratio * ph) + feedback * prev);
    x[t] = prev;
  }
  return x;
}

}  // namespace

std::vector<SyntheticTable> synthetic_corpus(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SyntheticTable> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto family = static_cast<Family>(i % kFamilies);
    const std::size_t n = kLengths[static_cast<std::size_t>(u(rng) * std::size(kLengths)) % std::size(kLengths)];
    // Stay well below the resampled Nyquist (300) and the source Nyquist.
    const std::size_t max_h = std::min<std::size_t>(n / 2 - 1, 160);
    std::vector<double> x;
    if (family == phase_mod) {
      x = phase_mod_cycle(rng, n);
    } else if (family == mixture) {
      const auto fa = static_cast<Family>(static_cast<int>(u(rng) * kAdditiveFamilies) % kAdditiveFamilies);
      const auto fb = static_cast<Family>(static_cast<int>(u(rng) * kAdditiveFamilies) % kAdditiveFamilies);
      auto a = harmonic_amps(fa, rng, max_h);
      const auto b = harmonic_amps(fb, rng, max_h);
      const double mix = u(rng);
      a.resize(std::max(a.size(), b.size()), 0.0);
      for (std::size_t h = 0; h < b.size(); ++h) a[h] = (1.0 - mix) * a[h] + mix * b[h];
      x = additive_cycle(a, {}, n);
    } else {
      const auto a = harmonic_amps(family, rng, max_h);
      // Mostly sine phase; some tables alternate harmonic signs (ramp-down vs ramp-up shapes).
      std::vector<double> ph(a.size(), 0.0);
      if (u(rng) < 0.3) {
        for (std::size_t h = 1; h < ph.size(); h += 2) ph[h] = std::numbers::pi;
      }
      x = additive_cycle(a, ph, n);
    }
    out.push_back({std::string(kFamilyNames[family]) + "_" + std::to_string(i), std::move(x)});
  }
  return out;
}

}  // namespace wtcvae
