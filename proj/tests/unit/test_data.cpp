#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <unistd.h>

#include "test_util.hpp"
#include "wtcvae/descriptors.hpp"
#include "wtcvae/fft.hpp"
#include "wtcvae/synthetic.hpp"
#include "wtcvae/wav.hpp"
#include "wtcvae/wavetable.hpp"

using namespace wtcvae;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
  const fs::path d = fs::temp_directory_path() / ("wtcvae_test_data_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

template <class V>
void put(std::ofstream& o, V v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

// Integer PCM writer independent of the library's writer.
void write_pcm(const fs::path& p, std::uint16_t channels, std::uint16_t bits, const std::vector<double>& interleaved) {
  std::ofstream o(p, std::ios::binary);
  const std::uint32_t bytes = static_cast<std::uint32_t>(interleaved.size() * bits / 8);
  o.write("RIFF", 4);
  put<std::uint32_t>(o, 36 + bytes);
  o.write("WAVEfmt ", 8);
  put<std::uint32_t>(o, 16);
  put<std::uint16_t>(o, 1);
  put<std::uint16_t>(o, channels);
  put<std::uint32_t>(o, 44100);
  put<std::uint32_t>(o, 44100u * channels * bits / 8);
  put<std::uint16_t>(o, static_cast<std::uint16_t>(channels * bits / 8));
  put<std::uint16_t>(o, bits);
  o.write("data", 4);
  put<std::uint32_t>(o, bytes);
  const double full = std::ldexp(1.0, bits - 1);
  for (const double v : interleaved) {
    const auto q = static_cast<std::int32_t>(std::lround(std::clamp(v * full, -full, full - 1)));
    if (bits == 8) put<std::uint8_t>(o, static_cast<std::uint8_t>(q + 128));
    if (bits == 16) put<std::int16_t>(o, static_cast<std::int16_t>(q));
    if (bits == 24) {
      const char b[3] = {static_cast<char>(q & 0xff), static_cast<char>((q >> 8) & 0xff),
                         static_cast<char>((q >> 16) & 0xff)};
      o.write(b, 3);
    }
  }
}

}  // namespace

TEST_CASE("rfft matches a direct DFT and irfft inverts it") {
  for (const std::size_t n : {8, 9, 600, 327}) {
    const auto x = testutil::random_vector<double>(n, n);
    const auto X = fft::rfft(x);
    REQUIRE(X.size() == n / 2 + 1);
    for (std::size_t k = 0; k < X.size(); k += std::max<std::size_t>(1, n / 17)) {
      std::complex<double> acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t % n) / double(n));
      CHECK(std::abs(acc - X[k]) < 1e-9);
    }
    const auto back = fft::irfft(X, n);
    for (std::size_t t = 0; t < n; ++t) CHECK_THAT(back[t] / double(n), WithinAbs(x[t], 1e-12));
  }
}

TEST_CASE("wav round trip and decoding") {
  const fs::path dir = temp_dir();
  SECTION("float writer output is decoded verbatim") {
    const auto x = testutil::random_vector<float>(600, 1);
    wav::write_float(dir / "f.wav", x, 48000);
    const auto y = load_single_cycle(dir / "f.wav");
    REQUIRE(y.size() == 600);
    for (std::size_t i = 0; i < 600; ++i) CHECK(y[i] == static_cast<double>(x[i]));
    const auto a = wav::read(dir / "f.wav");
    CHECK(a.sample_rate == 48000);
    CHECK(a.is_float);
  }
  SECTION("integer PCM at 8, 16 and 24 bits") {
    const auto x = testutil::random_vector<double>(327, 2, -0.9, 0.9);
    for (const std::uint16_t bits : {8, 16, 24}) {
      write_pcm(dir / "p.wav", 1, bits, x);
      const auto y = load_single_cycle(dir / "p.wav");
      REQUIRE(y.size() == 327);
      const double q = std::ldexp(1.0, -(bits - 1));
      for (std::size_t i = 0; i < y.size(); ++i) CHECK_THAT(y[i], WithinAbs(x[i], q));
    }
  }
  SECTION("rejections name the file") {
    write_pcm(dir / "stereo.wav", 2, 16, testutil::random_vector<double>(64, 3));
    CHECK_THROWS_WITH(load_single_cycle(dir / "stereo.wav"),
                      ContainsSubstring("multi-channel") && ContainsSubstring("stereo.wav"));
    write_pcm(dir / "short.wav", 1, 16, {0.1, 0.2, 0.3});
    CHECK_THROWS_WITH(load_single_cycle(dir / "short.wav"), ContainsSubstring("short.wav"));
    {
      std::ofstream(dir / "junk.wav") << "not a wave file";
    }
    CHECK_THROWS_WITH(load_single_cycle(dir / "junk.wav"), ContainsSubstring("junk.wav"));
    CHECK_THROWS_WITH(load_single_cycle(dir / "missing.wav"), ContainsSubstring("missing.wav"));
  }
  SECTION("stream writer patches sizes on close") {
    {
      wav::StreamWriter w(dir / "s.wav", 48000);
      const auto a = testutil::random_vector<float>(100, 4);
      w.append(a);
      w.append(a);
      CHECK(w.frames_written() == 200);
    }
    CHECK(wav::read(dir / "s.wav").frames() == 200);
  }
  fs::remove_all(dir);
}

TEST_CASE("resample_to_table") {
  SECTION("sine at n = 480 becomes the analytic 600-point sine") {
    const auto y = resample_to_table(sine_cycle(480));
    REQUIRE(y.size() == 600);
    for (std::size_t t = 0; t < 600; ++t)
      CHECK_THAT(y[t], WithinAbs(std::sin(2.0 * std::numbers::pi * double(t) / 600.0), 1e-6));
  }
  SECTION("n = 600 is the identity") {
    const auto x = testutil::random_vector<double>(600, 5);
    const auto y = resample_to_table(x);
    for (std::size_t t = 0; t < 600; ++t) CHECK_THAT(y[t], WithinAbs(x[t], 1e-9));
  }
  SECTION("constants stay constant") {
    const std::vector<double> c(327, 0.3);
    for (const double v : resample_to_table(c)) CHECK_THAT(v, WithinAbs(0.3, 1e-12));
  }
  SECTION("harmonic amplitudes survive up to the smaller bandwidth") {
    std::vector<double> amps(100), ph(100);
    for (std::size_t h = 0; h < 100; ++h) {
      amps[h] = 1.0 / double(h + 1);
      ph[h] = 0.37 * double(h);
    }
    for (const std::size_t n : {256, 327, 1024}) {
      const auto x = additive_cycle(amps, ph, n);
      const auto Y = fft::rfft(resample_to_table(x));
      const auto X = fft::rfft(x);
      const std::size_t top = std::min<std::size_t>((std::min(n, std::size_t{600}) - 1) / 2, 100);
      for (std::size_t h = 1; h <= top; ++h) {
        CHECK_THAT(std::abs(Y[h]) / 600.0, WithinAbs(std::abs(X[h]) / double(n), 1e-6));
      }
    }
  }
  SECTION("too short") { CHECK_THROWS_AS(resample_to_table(std::vector<double>(7, 1.0)), Error); }
}

TEST_CASE("normalize_table") {
  const auto x = resample_to_table(saw_cycle(30, 600));
  std::vector<double> half = x, shifted = x;
  for (double& v : half) v *= 0.5;
  for (double& v : shifted) v = 0.5 * v + 0.2;
  const Wavetable a = normalize_table(x);
  CHECK(normalize_table(half).samples == a.samples);
  const Wavetable b = normalize_table(shifted);
  for (std::size_t i = 0; i < 600; ++i) CHECK_THAT(b.samples[i], WithinAbs(a.samples[i], 1e-6));

  double mean = 0.0, peak = 0.0;
  for (const float v : a.samples) {
    mean += v;
    peak = std::max(peak, double(std::abs(v)));
  }
  CHECK(std::abs(mean / 600.0) < 1e-6);
  CHECK(peak == 1.0);

  const std::vector<double> again(a.samples.begin(), a.samples.end());
  const Wavetable c = normalize_table(again);
  for (std::size_t i = 0; i < 600; ++i) CHECK_THAT(c.samples[i], WithinAbs(a.samples[i], 1e-6));

  CHECK_THROWS_WITH(normalize_table(std::vector<double>(600, 0.0)), ContainsSubstring("silent table"));
  CHECK_THROWS_WITH(normalize_table(std::vector<double>(600, 0.7)), ContainsSubstring("silent table"));
  CHECK_THROWS_AS(normalize_table(std::vector<double>(599, 0.7)), Error);
}

TEST_CASE("split_dataset") {
  CHECK(split_sizes(4158) == SplitSizes{3326, 416, 416});
  CHECK(split_sizes(10) == SplitSizes{8, 1, 1});
  CHECK(split_sizes(640) == SplitSizes{512, 64, 64});
  const auto a = split_dataset(4158, 42);
  CHECK(a == split_dataset(4158, 42));
  CHECK(a != split_dataset(4158, 43));
  std::size_t counts[3] = {};
  for (const Split s : a) ++counts[static_cast<int>(s)];
  CHECK(counts[0] == 3326);
  CHECK(counts[1] == 416);
  CHECK(counts[2] == 416);
  CHECK_THROWS_AS(split_dataset(9, 42), Error);
  CHECK(parse_split(to_string(Split::val)) == Split::val);
  CHECK_THROWS_AS(parse_split("holdout"), Error);
}

TEST_CASE("concat_cycles") {
  const auto x = testutil::random_vector<float>(600, 6);
  const auto one = concat_cycles(std::span<const float>(x), 1);
  REQUIRE(one.size() == 600);
  for (std::size_t i = 0; i < 600; ++i) CHECK(one[i] == x[i]);
  const auto six = concat_cycles(std::span<const float>(x));
  REQUIRE(six.size() == 3600);
  for (std::size_t i = 0; i + 600 < six.size(); ++i) CHECK(six[i] == six[i + 600]);
}

TEST_CASE("synthetic corpus is seeded and resamples cleanly") {
  const auto a = synthetic_corpus(60, 5);
  const auto b = synthetic_corpus(60, 5);
  REQUIRE(a.size() == 60);
  std::set<std::size_t> lengths;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].samples == b[i].samples);
    CHECK(a[i].name == b[i].name);
    lengths.insert(a[i].samples.size());
    CHECK_NOTHROW(normalize_table(resample_to_table(a[i].samples)));
  }
  CHECK(lengths.size() > 2);
  CHECK(synthetic_corpus(60, 6)[0].samples != a[0].samples);
}

TEST_CASE("synthetic corpus spans low and high odd-harmonic ratios") {
  std::size_t low = 0, high = 0;
  for (const auto& t : synthetic_corpus(140, 2024)) {
    const double r = odd_harmonic_energy_ratio(table_spectrum(normalize_table(resample_to_table(t.samples)).samples,
                                                              Window::hann));
    low += r < 0.2 ? 1 : 0;
    high += r > 0.9 ? 1 : 0;
  }
  CHECK(low >= 10);
  CHECK(high >= 10);
}
