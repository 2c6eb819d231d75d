// Times one forward + backward pass of a training batch.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>

#include "wtcvae/cvae.hpp"
#include "wtcvae/simd/kernels.hpp"

using namespace wtcvae;

int main(int argc, char** argv) {
  const std::size_t batch = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 32;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 20;
  Cvae<float> model;
  model.initialize(1);
  std::mt19937_64 rng(3);
  std::normal_distribution<float> nd;
  ad::Tensor<float> tables({1, batch, kTableLength});
  for (auto& v : tables.values) v = std::tanh(nd(rng));
  ad::Tensor<float> labels({3, batch, 1}, 0.5f);
  ad::Tensor<float> noise({model.config().latent_dim, batch, 1});
  for (auto& v : noise.values) v = nd(rng);
  double best = 1e9;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    ad::Tape<float> tape(false);
    auto g = total_loss(model, tape, tables, labels, noise, 1e-3);
    tape.backward(g.total);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, dt);
  }
  std::printf("isa=%s batch=%zu best=%.3f ms per-item=%.3f ms params=%zu\n",
              std::string(simd::isa_name(simd::active_isa())).c_str(), batch, best * 1e3, best * 1e3 / batch,
              model.parameter_count());
}
