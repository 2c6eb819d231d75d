#pragma once

// Reconstruction quality, label controllability and generation timing.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wtcvae/checkpoint.hpp"
#include "wtcvae/dataset_io.hpp"

namespace wtcvae {

// Maps a table plus its own labels to a new table conditioned on `target`.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::vector<float> generate(std::span<const float> table, const SemanticLabels& own,
                                      const SemanticLabels& target) = 0;
};

// Encode with the table's own labels, take z = mu, decode with `target`.
class CvaeGenerator final : public Generator {
 public:
  explicit CvaeGenerator(Cvae<float> model) : model_(std::move(model)) {}
  std::vector<float> generate(std::span<const float> table, const SemanticLabels& own,
                              const SemanticLabels& target) override;
  const Cvae<float>& model() const { return model_; }

 private:
  Cvae<float> model_;
};

// Returns the input unchanged.
class IdentityGenerator final : public Generator {
 public:
  std::vector<float> generate(std::span<const float> table, const SemanticLabels&, const SemanticLabels&) override {
    return {table.begin(), table.end()};
  }
};

// Returns -x: same amplitude spectrum, different waveform.
class NegationGenerator final : public Generator {
 public:
  std::vector<float> generate(std::span<const float> table, const SemanticLabels&, const SemanticLabels&) override;
};

std::unique_ptr<Generator> make_generator(const Checkpoint& ckpt);

// Indices of the tables in `split`, or every table for nullopt.
std::vector<std::size_t> evaluation_indices(const StoredDataset& data, std::optional<Split> split);

struct ReconstructionReport {
  double waveform_mae = 0.0;
  double logspec_mae = 0.0;
  std::size_t tables = 0;
};

inline constexpr double kLogSpectrumEps = 1e-7;

// mean |log(S + eps) - log(S_hat + eps)| over the 1801 bins of the 6-fold
// rect-window spectra.
double logspec_mae(std::span<const float> x, std::span<const float> y);

// Each table is conditioned on its own labels computed with `stats`.
ReconstructionReport reconstruction_mae(Generator& gen, const StoredDataset& data, std::span<const std::size_t> indices,
                                        const LabelStats& stats);

// Sample correlation; nullopt when n < 2 or either input is constant.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

// steps values from 0 to 1 inclusive.
std::vector<double> sweep_grid(std::size_t steps);

struct SweepTrace {
  std::size_t table = 0;  // index into the dataset
  std::vector<double> requested;
  std::vector<double> achieved;
  double mae = 0.0;
  std::optional<double> pearson;
};

struct LabelControl {
  double mae = 0.0;      // mean of per-trace MAE
  double pearson = 0.0;  // mean over traces with a defined correlation
  std::size_t excluded = 0;  // traces with a constant output label
  std::vector<SweepTrace> traces;
};

struct ControllabilityReport {
  std::size_t steps = 0;
  std::size_t tables = 0;
  std::array<LabelControl, 3> labels;  // bright, warm, rich
};

// For every table and label: hold the other two labels at the table's own
// values, request each grid value, and measure the label of the output.
ControllabilityReport controllability_sweep(Generator& gen, const StoredDataset& data,
                                            std::span<const std::size_t> indices, const LabelStats& stats,
                                            std::size_t steps = 20);

struct BenchmarkReport {
  std::size_t runs = 0;
  std::size_t warmup = 0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::vector<double> samples_ms;
};

// Nearest-rank percentile, q in (0, 1].
double percentile(std::vector<double> samples, double q);

// Times gen.generate on one table, single thread, after `warmup` discarded runs.
BenchmarkReport benchmark_generation(Generator& gen, std::span<const float> table, const SemanticLabels& own,
                                     std::size_t runs = 100, std::size_t warmup = 10);

std::string to_json(const ReconstructionReport& r);
std::string to_json(const ControllabilityReport& r, bool with_traces = false);
std::string to_json(const BenchmarkReport& r);
// label,table,step,requested,achieved
std::string traces_csv(const ControllabilityReport& r);

}  // namespace wtcvae
