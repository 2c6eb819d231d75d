// Writes a seeded synthetic corpus of single-cycle WAV files.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "wtcvae/synthetic.hpp"
#include "wtcvae/wav.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic single-cycle wavetable corpus"};
  std::filesystem::path out;
  std::size_t count = 640;
  std::uint64_t seed = 2024;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--count", count, "Number of tables")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Corpus seed");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out);
    const auto corpus = wtcvae::synthetic_corpus(count, seed);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      // Single cycles carry no meaningful rate; 44100 mirrors common libraries.
      std::vector<float> x(corpus[i].samples.begin(), corpus[i].samples.end());
      float peak = 0.0f;
      for (const float v : x) peak = std::max(peak, std::abs(v));
      if (peak > 0.0f) {
        for (float& v : x) v /= peak;
      }
      char name[32];
      std::snprintf(name, sizeof name, "%05zu_", i);
      wtcvae::wav::write_float(out / (name + corpus[i].name + ".wav"), x, 44100);
    }
    std::printf("wrote %zu tables to %s\n", corpus.size(), out.string().c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
