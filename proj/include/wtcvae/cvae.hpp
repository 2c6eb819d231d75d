#pragma once

// Conditional VAE over single-cycle wavetables.
//
// Encoder: [table ; bright ; warm ; rich] as a 4 x 600 input -> strided
// convolutions -> flatten -> dense heads for mu and logvar.
// Decoder: [z ; labels] -> dense -> 128 x 6 -> four blocks of
// (nearest upsample, conv + 1x1 projection shortcut, activation) -> 1 x 600,
// with tanh on the last block.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wtcvae/autodiff.hpp"
#include "wtcvae/common.hpp"
#include "wtcvae/descriptors.hpp"

namespace wtcvae {

struct ModelConfig {
  std::size_t latent_dim = 32;
  std::size_t label_dim = 3;
  std::size_t table_length = kTableLength;
  std::size_t kernel_size = 9;
  std::vector<std::size_t> encoder_channels{16, 32, 64, 128};
  std::vector<std::size_t> encoder_strides{2, 2, 5, 5};
  std::vector<std::size_t> decoder_channels{64, 32, 16, 1};
  std::vector<std::size_t> upsample_factors{5, 5, 2, 2};

  // Throws Error unless the stride and upsample plans map table_length to an
  // integral bottleneck and back.
  void validate() const;
  std::size_t bottleneck_length() const;
  bool operator==(const ModelConfig&) const = default;
};

// KL weight annealing: geometric growth from beta_min at epoch 0 to beta_max at
// epoch `warmup_epochs`, constant afterwards.
struct BetaSchedule {
  double beta_min = 1e-4;
  double beta_max = 1e-1;
  double warmup_epochs = 10000;

  void validate() const;
  bool operator==(const BetaSchedule&) const = default;
};

double beta_at(double epoch, const BetaSchedule& schedule);

struct LossBreakdown {
  double reconstruction = 0.0;
  double kl = 0.0;
  double beta = 0.0;
  double total = 0.0;
};

// Floor inside the log of the L1 spectral term.
inline constexpr double kSpectralEps = 1e-7;

// ||S_x - S_y||_2 / ||S_x||_2 + log(||S_x - S_y||_1 + eps) on rect-window
// spectra of the 6-fold repetitions. Throws Error on a silent reference.
double spectral_distance(std::span<const float> reference, std::span<const float> candidate);
double spectral_distance(const Spectrum& reference, const Spectrum& candidate);

// 0.5 * sum(mu^2 + exp(logvar) - logvar - 1).
double kl_divergence(std::span<const double> mu, std::span<const double> logvar);

struct LatentCode {
  std::vector<double> mu;
  std::vector<double> logvar;
  std::vector<double> z;
};

template <class T>
class Cvae {
 public:
  explicit Cvae(ModelConfig config = {});

  const ModelConfig& config() const { return config_; }

  // Uniform in +-sqrt(1 / fan_in) for every weight and bias.
  void initialize(std::uint64_t seed);

  // Stable order; this is the checkpoint blob order.
  std::vector<ad::Parameter<T>>& parameters() { return params_; }
  const std::vector<ad::Parameter<T>>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  void zero_grad();

  struct Posterior {
    ad::Var<T> mu;
    ad::Var<T> logvar;
  };

  // tables (1, B, L) and labels (3, B, 1).
  Posterior encode(ad::Tape<T>& tape, const ad::Tensor<T>& tables, const ad::Tensor<T>& labels);
  // z (latent, B, 1) -> (1, B, L) in (-1, 1).
  ad::Var<T> decode(ad::Tape<T>& tape, ad::Var<T> z, const ad::Tensor<T>& labels);

  // Single-table inference helpers (no sampling).
  LatentCode encode_table(std::span<const float> table, const SemanticLabels& labels);
  std::vector<float> decode_latent(std::span<const double> z, const SemanticLabels& labels);
  // encode with `own`, take z = mu, decode with `target`.
  std::vector<float> regenerate(std::span<const float> table, const SemanticLabels& own, const SemanticLabels& target);

  std::vector<float> to_blob() const;
  void from_blob(std::span<const float> blob);

 private:
  ad::Var<T> param(ad::Tape<T>& tape, std::size_t index) { return tape.parameter(params_[index]); }
  void add_param(std::string name, ad::Shape shape, std::size_t fan_in);

  ModelConfig config_;
  std::vector<ad::Parameter<T>> params_;
  std::vector<std::size_t> fan_in_;
  std::size_t decoder_first_ = 0;
};

// Batch tensors from tables and labels.
template <class T>
ad::Tensor<T> table_batch(std::span<const std::span<const float>> tables);
template <class T>
ad::Tensor<T> label_batch(std::span<const SemanticLabels> labels);

// z = mu + exp(logvar / 2) * noise; noise is (latent, B, 1) and gets no gradient.
template <class T>
ad::Var<T> reparameterize(ad::Var<T> mu, ad::Var<T> logvar, const ad::Tensor<T>& noise);

// Batch-mean KL divergence to the standard normal prior.
template <class T>
ad::Var<T> kl_divergence(ad::Var<T> mu, ad::Var<T> logvar);

// Batch-mean spectral distance between `reference` (1, B, L) and `output`.
template <class T>
ad::Var<T> spectral_distance(ad::Var<T> output, const ad::Tensor<T>& reference);

// Single-sample estimate of reconstruction + beta * KL, recorded on `tape`.
template <class T>
struct LossGraph {
  ad::Var<T> total;
  ad::Var<T> reconstruction;
  ad::Var<T> kl;
  LossBreakdown breakdown;
};

template <class T>
LossGraph<T> total_loss(Cvae<T>& model, ad::Tape<T>& tape, const ad::Tensor<T>& tables, const ad::Tensor<T>& labels,
                        const ad::Tensor<T>& noise, double beta);

}  // namespace wtcvae
