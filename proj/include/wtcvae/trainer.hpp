#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wtcvae/checkpoint.hpp"
#include "wtcvae/cvae.hpp"
#include "wtcvae/dataset_io.hpp"

namespace wtcvae {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
class Adam {
 public:
  Adam(std::span<const ad::Parameter<T>> params, AdamConfig config = {});

  // Bias-corrected update from each parameter's accumulated gradient. Throws
  // ad::NonFiniteError naming the parameter and leaves all parameters and
  // moments untouched when any gradient is NaN or infinite.
  void step(std::span<ad::Parameter<T>> params);

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<T>> m_, v_;
  std::uint64_t t_ = 0;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 30000;
  std::uint64_t seed = 1;
  BetaSchedule schedule;
  AdamConfig adam;
  ModelConfig model;
  // Use only the first `train_subset` training tables (0 = all).
  std::size_t train_subset = 0;
  // Validation pass every this many epochs, and always on the last epoch.
  std::size_t val_every = 10;
  // Checkpoint every this many epochs (0 = only at the end).
  std::size_t checkpoint_every = 0;
  std::filesystem::path dataset;     // manifest
  std::filesystem::path checkpoint;  // output; empty = do not write
  std::filesystem::path metrics;     // CSV; empty = do not write

  // 512 training tables, 2000 epochs, beta warm-up over the first third.
  void apply_desk_scale();
  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double beta = 0.0;
  double train_recon = 0.0;
  double train_kl = 0.0;
  // NaN when no validation pass ran this epoch.
  double val_recon = std::numeric_limits<double>::quiet_NaN();
  double val_kl = std::numeric_limits<double>::quiet_NaN();
};

std::string metrics_csv(std::span<const EpochMetrics> rows);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;
  double seconds = 0.0;
};

// Called after every epoch; return false to stop early (the checkpoint then
// records the epochs completed so far).
using EpochCallback = std::function<bool(const EpochMetrics&)>;

// Trains on the dataset's training split. Epoch e (0-based) uses
// beta_at(e, schedule). Throws ad::NonFiniteError with the offending batch's
// source ids when a loss or gradient is not finite.
TrainResult train(const TrainConfig& config, const StoredDataset& data, const EpochCallback& on_epoch = {});
TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch = {});

// Deterministic (z = mu) reconstruction and KL terms averaged over `indices`.
struct ValidationLoss {
  double recon = 0.0;
  double kl = 0.0;
};
ValidationLoss validation_loss(Cvae<float>& model, const StoredDataset& data, std::span<const std::size_t> indices,
                               std::size_t batch_size = 32);

}  // namespace wtcvae
