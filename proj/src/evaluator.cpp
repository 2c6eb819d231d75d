#include "wtcvae/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace wtcvae {

using nlohmann::json;

std::vector<float> CvaeGenerator::generate(std::span<const float> table, const SemanticLabels& own,
                                           const SemanticLabels& target) {
  return model_.regenerate(table, own, target);
}

std::vector<float> NegationGenerator::generate(std::span<const float> table, const SemanticLabels&,
                                               const SemanticLabels&) {
  std::vector<float> out(table.begin(), table.end());
  for (float& v : out) v = -v;
  return out;
}

std::unique_ptr<Generator> make_generator(const Checkpoint& ckpt) {
  if (ckpt.kind == ModelKind::identity) return std::make_unique<IdentityGenerator>();
  return std::make_unique<CvaeGenerator>(model_from_checkpoint<float>(ckpt));
}

std::vector<std::size_t> evaluation_indices(const StoredDataset& data, std::optional<Split> split) {
  if (split) return data.dataset.indices(*split);
  std::vector<std::size_t> all(data.dataset.tables.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

double logspec_mae(std::span<const float> x, std::span<const float> y) {
  const Spectrum a = table_spectrum(x, Window::rect);
  const Spectrum b = table_spectrum(y, Window::rect);
  double acc = 0.0;
  for (std::size_t k = 0; k < a.magnitudes.size(); ++k) {
    acc += std::abs(std::log(a.magnitudes[k] + kLogSpectrumEps) - std::log(b.magnitudes[k] + kLogSpectrumEps));
  }
  return acc / static_cast<double>(a.magnitudes.size());
}

ReconstructionReport reconstruction_mae(Generator& gen, const StoredDataset& data, std::span<const std::size_t> indices,
                                        const LabelStats& stats) {
  ReconstructionReport r;
  for (const std::size_t i : indices) {
    const std::vector<float>& x = data.dataset.tables.at(i).samples;
    const SemanticLabels own = compute_labels(x, stats);
    const std::vector<float> y = gen.generate(x, own, own);
    if (y.size() != x.size()) throw Error("generator returned " + std::to_string(y.size()) + " samples");
    double wave = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) wave += std::abs(static_cast<double>(x[t]) - static_cast<double>(y[t]));
    r.waveform_mae += wave / static_cast<double>(x.size());
    r.logspec_mae += logspec_mae(x, y);
  }
  r.tables = indices.size();
  if (r.tables > 0) {
    r.waveform_mae /= static_cast<double>(r.tables);
    r.logspec_mae /= static_cast<double>(r.tables);
  }
  return r;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("pearson: inputs differ in length");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
  };
  if (constant(a) || constant(b)) return std::nullopt;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> sweep_grid(std::size_t steps) {
  if (steps < 2) throw Error("sweep grid needs at least 2 steps");
  std::vector<double> g(steps);
  for (std::size_t i = 0; i < steps; ++i) g[i] = static_cast<double>(i) / static_cast<double>(steps - 1);
  return g;
}

ControllabilityReport controllability_sweep(Generator& gen, const StoredDataset& data,
                                            std::span<const std::size_t> indices, const LabelStats& stats,
                                            std::size_t steps) {
  const std::vector<double> grid = sweep_grid(steps);
  ControllabilityReport r;
  r.steps = steps;
  r.tables = indices.size();
  for (const std::size_t i : indices) {
    const std::vector<float>& x = data.dataset.tables.at(i).samples;
    const SemanticLabels own = compute_labels(x, stats);
    for (std::size_t l = 0; l < 3; ++l) {
      SweepTrace tr;
      tr.table = i;
      tr.requested = grid;
      for (const double c : grid) {
        SemanticLabels target = own;
        target[l] = c;
        tr.achieved.push_back(compute_labels(gen.generate(x, own, target), stats)[l]);
      }
      for (std::size_t s = 0; s < steps; ++s) tr.mae += std::abs(tr.requested[s] - tr.achieved[s]);
      tr.mae /= static_cast<double>(steps);
      tr.pearson = pearson(tr.requested, tr.achieved);
      r.labels[l].traces.push_back(std::move(tr));
    }
  }
  for (LabelControl& lc : r.labels) {
    std::size_t defined = 0;
    for (const SweepTrace& tr : lc.traces) {
      lc.mae += tr.mae;
      if (tr.pearson) {
        lc.pearson += *tr.pearson;
        ++defined;
      } else {
        ++lc.excluded;
      }
    }
    if (!lc.traces.empty()) lc.mae /= static_cast<double>(lc.traces.size());
    lc.pearson = defined > 0 ? lc.pearson / static_cast<double>(defined) : std::nan("");
  }
  return r;
}

double percentile(std::vector<double> samples, double q) {
  if (samples.empty()) throw Error("percentile of no samples");
  if (!(q > 0.0 && q <= 1.0)) throw Error("percentile: q must be in (0, 1]");
  std::sort(samples.begin(), samples.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
  return samples[std::max<std::size_t>(rank, 1) - 1];
}

BenchmarkReport benchmark_generation(Generator& gen, std::span<const float> table, const SemanticLabels& own,
                                     std::size_t runs, std::size_t warmup) {
  if (runs == 0) throw Error("benchmark needs at least one run");
  using clock = std::chrono::steady_clock;
  for (std::size_t i = 0; i < warmup; ++i) (void)gen.generate(table, own, own);
  BenchmarkReport r;
  r.runs = runs;
  r.warmup = warmup;
  r.samples_ms.reserve(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0 = clock::now();
    const std::vector<float> y = gen.generate(table, own, own);
    const auto t1 = clock::now();
    if (y.empty()) throw Error("generator returned nothing");
    r.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  r.mean_ms = std::accumulate(r.samples_ms.begin(), r.samples_ms.end(), 0.0) / static_cast<double>(runs);
  r.p95_ms = percentile(r.samples_ms, 0.95);
  r.min_ms = *std::min_element(r.samples_ms.begin(), r.samples_ms.end());
  r.max_ms = *std::max_element(r.samples_ms.begin(), r.samples_ms.end());
  return r;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string to_json(const ReconstructionReport& r) {
  return json{{"tables", r.tables}, {"waveform_mae", r.waveform_mae}, {"logspec_mae", r.logspec_mae}}.dump(2);
}

std::string to_json(const ControllabilityReport& r, bool with_traces) {
  json labels = json::object();
  for (std::size_t l = 0; l < 3; ++l) {
    const LabelControl& lc = r.labels[l];
    json entry = {{"mae", lc.mae}, {"pearson", number_or_null(lc.pearson)}, {"excluded", lc.excluded}};
    if (with_traces) {
      json traces = json::array();
      for (const SweepTrace& tr : lc.traces) {
        traces.push_back({{"table", tr.table},
                          {"requested", tr.requested},
                          {"achieved", tr.achieved},
                          {"mae", tr.mae},
                          {"pearson", tr.pearson ? json(*tr.pearson) : json(nullptr)}});
      }
      entry["traces"] = std::move(traces);
    }
    labels[kLabelNames[l]] = std::move(entry);
  }
  return json{{"steps", r.steps}, {"tables", r.tables}, {"labels", labels}}.dump(2);
}

std::string to_json(const BenchmarkReport& r) {
  return json{{"runs", r.runs},       {"warmup", r.warmup}, {"mean_ms", r.mean_ms},
              {"p95_ms", r.p95_ms},   {"min_ms", r.min_ms}, {"max_ms", r.max_ms}}
      .dump(2);
}

std::string traces_csv(const ControllabilityReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "label,table,step,requested,achieved\n";
  for (std::size_t l = 0; l < 3; ++l) {
    for (const SweepTrace& tr : r.labels[l].traces) {
      for (std::size_t s = 0; s < tr.requested.size(); ++s) {
        out << kLabelNames[l] << ',' << tr.table << ',' << s << ',' << tr.requested[s] << ',' << tr.achieved[s] << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace wtcvae
