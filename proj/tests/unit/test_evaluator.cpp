#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "wtcvae/evaluator.hpp"
#include "wtcvae/synthetic.hpp"

using namespace wtcvae;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

StoredDataset synthetic_dataset(std::size_t n, std::uint64_t seed = 5) {
  std::vector<Wavetable> tables;
  std::vector<std::string> sources;
  for (const SyntheticTable& s : synthetic_corpus(n, seed)) {
    tables.push_back(normalize_table(resample_to_table(s.samples), s.name, tables.size()));
    sources.push_back(s.name);
  }
  return make_dataset(std::move(tables), std::move(sources));
}

// Output warm label equals the request: first and second harmonic with
// energy shares c and 1 - c.
class WarmOracle final : public Generator {
 public:
  std::vector<float> generate(std::span<const float>, const SemanticLabels&, const SemanticLabels& target) override {
    const double amps[2] = {std::sqrt(target.warm), std::sqrt(1.0 - target.warm)};
    const auto x = additive_cycle(amps);
    return {x.begin(), x.end()};
  }
};

// One-pass textbook formula, independent of the two-pass implementation.
double pearson_direct(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    sab += a[i] * b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

}  // namespace

TEST_CASE("reconstruction: identity oracle scores exactly zero") {
  const StoredDataset data = synthetic_dataset(20);
  IdentityGenerator id;
  const auto idx = evaluation_indices(data, Split::train);
  const ReconstructionReport r = reconstruction_mae(id, data, idx, data.stats);
  CHECK(r.tables == idx.size());
  CHECK(r.waveform_mae == 0.0);
  CHECK(r.logspec_mae == 0.0);
}

TEST_CASE("reconstruction: negation oracle has waveform error mean|2x| and no spectral error") {
  const StoredDataset data = synthetic_dataset(20);
  NegationGenerator neg;
  const auto idx = evaluation_indices(data, std::nullopt);
  CHECK(idx.size() == 20);
  const ReconstructionReport r = reconstruction_mae(neg, data, idx, data.stats);
  double expected = 0.0;
  for (const std::size_t i : idx) {
    double m = 0.0;
    for (const float v : data.dataset.tables[i].samples) m += std::abs(2.0 * v);
    expected += m / 600.0;
  }
  CHECK_THAT(r.waveform_mae, WithinRel(expected / 20.0, 1e-12));
  CHECK_THAT(r.logspec_mae, WithinAbs(0.0, 1e-9));
}

TEST_CASE("logspec mae: halving the gain matches the per-bin formula") {
  std::vector<float> x(600), y(600);
  const auto s = sine_cycle();
  for (std::size_t i = 0; i < 600; ++i) {
    x[i] = static_cast<float>(s[i]);
    y[i] = 0.5f * x[i];
  }
  // y = x / 2 exactly in float, so S_y = S_x / 2 bin by bin.
  const Spectrum sx = table_spectrum(x, Window::rect);
  double expected = 0.0;
  for (const double m : sx.magnitudes) expected += std::log((m + 1e-7) / (0.5 * m + 1e-7));
  expected /= 1801.0;
  CHECK_THAT(logspec_mae(x, y), WithinRel(expected, 1e-9));
  CHECK(expected > 0.0);
  CHECK(expected <= std::log(2.0));
}

TEST_CASE("pearson: examples and undefined cases") {
  const std::vector<double> a = {0.3, -1.2, 4.0, 2.5, 0.0};
  std::vector<double> neg(a.size());
  std::transform(a.begin(), a.end(), neg.begin(), [](double v) { return -v; });
  CHECK_THAT(*pearson(a, a), WithinAbs(1.0, 1e-15));
  CHECK_THAT(*pearson(a, neg), WithinAbs(-1.0, 1e-15));

  const std::vector<double> x = {1, 2, 3}, y = {1, 2, 4};
  // Hand evaluation: 3 / sqrt(2 * 42 / 9).
  CHECK_THAT(*pearson(x, y), WithinAbs(3.0 / std::sqrt(2.0 * 42.0 / 9.0), 1e-15));
  CHECK_THAT(*pearson(x, y), WithinAbs(pearson_direct(x, y), 1e-14));

  CHECK(!pearson(std::vector<double>{2, 2, 2}, x).has_value());
  CHECK(!pearson(x, std::vector<double>{0.7, 0.7, 0.7}).has_value());
  CHECK(!pearson(std::vector<double>{1}, std::vector<double>{2}).has_value());
  CHECK_THROWS_AS(pearson(x, a), Error);
}

TEST_CASE("pearson: invariant under positive affine maps") {
  std::vector<double> a(20), b(20);
  for (std::size_t i = 0; i < 20; ++i) {
    a[i] = std::sin(0.7 * i) + 0.1 * i;
    b[i] = std::cos(0.3 * i * i);
  }
  const double r = *pearson(a, b);
  std::vector<double> a2 = a, b2 = b;
  for (double& v : a2) v = 3.5 * v - 11.0;
  for (double& v : b2) v = 0.02 * v + 7.0;
  CHECK_THAT(*pearson(a2, b2), WithinAbs(r, 1e-12));
  CHECK_THAT(r, WithinAbs(pearson_direct(a, b), 1e-12));
}

TEST_CASE("sweep grid: 20 points from 0 to 1 spaced 1/19") {
  const auto g = sweep_grid(20);
  REQUIRE(g.size() == 20);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK_THAT(g[i] - g[i - 1], WithinAbs(1.0 / 19.0, 1e-15));
  CHECK_THROWS_AS(sweep_grid(1), Error);
}

TEST_CASE("controllability: a perfect warm controller scores MAE 0 and Pearson 1") {
  const StoredDataset data = synthetic_dataset(20);
  WarmOracle oracle;
  const auto idx = evaluation_indices(data, Split::train);
  const ControllabilityReport r = controllability_sweep(oracle, data, idx, data.stats);
  CHECK(r.steps == 20);
  CHECK(r.tables == idx.size());
  const LabelControl& warm = r.labels[1];
  REQUIRE(warm.traces.size() == idx.size());
  CHECK(warm.excluded == 0);
  CHECK_THAT(warm.mae, WithinAbs(0.0, 1e-9));
  CHECK_THAT(warm.pearson, WithinAbs(1.0, 1e-9));
  for (const SweepTrace& tr : warm.traces) {
    CHECK(tr.requested.size() == 20);
    CHECK(tr.achieved.size() == 20);
  }
}

TEST_CASE("controllability: constant outputs are counted as excluded, runs repeat exactly") {
  const StoredDataset data = synthetic_dataset(20);
  IdentityGenerator id;
  const auto idx = evaluation_indices(data, Split::train);
  const ControllabilityReport r = controllability_sweep(id, data, idx, data.stats);
  for (const LabelControl& lc : r.labels) {
    CHECK(lc.excluded == idx.size());
    CHECK(std::isnan(lc.pearson));
  }
  const auto parsed = nlohmann::json::parse(to_json(r));
  CHECK(parsed["labels"]["warm"]["pearson"].is_null());
  CHECK(parsed["labels"]["warm"]["excluded"] == idx.size());

  WarmOracle oracle;
  const auto a = controllability_sweep(oracle, data, idx, data.stats);
  const auto b = controllability_sweep(oracle, data, idx, data.stats);
  CHECK(to_json(a, true) == to_json(b, true));
  CHECK(traces_csv(a) == traces_csv(b));
  const std::string csv = traces_csv(a);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(1 + 3 * 20 * idx.size()));
}

TEST_CASE("benchmark: summary statistics follow from the samples") {
  const StoredDataset data = synthetic_dataset(10);
  NegationGenerator neg;
  const auto& t = data.dataset.tables[0].samples;
  const BenchmarkReport r = benchmark_generation(neg, t, compute_labels(t, data.stats), 37, 3);
  REQUIRE(r.samples_ms.size() == 37);
  CHECK(r.runs == 37);
  CHECK(r.warmup == 3);
  const double mean = std::accumulate(r.samples_ms.begin(), r.samples_ms.end(), 0.0) / 37.0;
  CHECK_THAT(r.mean_ms, WithinRel(mean, 1e-12));
  CHECK(r.p95_ms >= r.min_ms);
  CHECK(r.max_ms >= r.p95_ms);
  const auto parsed = nlohmann::json::parse(to_json(r));
  CHECK(parsed.contains("mean_ms"));
  CHECK(parsed.contains("p95_ms"));
}

TEST_CASE("percentile: nearest rank") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  std::reverse(v.begin(), v.end());
  CHECK(percentile(v, 0.95) == 95.0);
  CHECK(percentile(v, 1.0) == 100.0);
  CHECK(percentile({4.0}, 0.95) == 4.0);
  CHECK_THROWS_AS(percentile({}, 0.5), Error);
}

TEST_CASE("generators: checkpoint kinds map to the right generator") {
  Checkpoint id;
  id.kind = ModelKind::identity;
  auto g = make_generator(id);
  const std::vector<float> x = {0.5f, -0.25f, 1.0f};
  CHECK(g->generate(x, {}, {}) == x);

  ModelConfig small;
  small.latent_dim = 4;
  small.encoder_channels = {3, 4, 4, 5};
  small.decoder_channels = {4, 3, 2, 1};
  Cvae<float> model(small);
  model.initialize(2);
  auto cg = make_generator(make_checkpoint(model, BetaSchedule{}, LabelStats{}));
  const StoredDataset data = synthetic_dataset(10);
  const auto& t = data.dataset.tables[0].samples;
  const auto out = cg->generate(t, {0.5, 0.5, 0.5}, {0.1, 0.9, 0.4});
  CHECK(out.size() == 600);
  CHECK(out == model.regenerate(t, {0.5, 0.5, 0.5}, {0.1, 0.9, 0.4}));
}
