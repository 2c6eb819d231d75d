#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <unistd.h>

#include "wtcvae/checkpoint.hpp"
#include "wtcvae/dataset_io.hpp"
#include "wtcvae/synthetic.hpp"
#include "wtcvae/trainer.hpp"
#include "wtcvae/wav.hpp"

using namespace wtcvae;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("wtcvae_test_train_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ModelConfig small_config() {
  ModelConfig c;
  c.latent_dim = 4;
  c.encoder_channels = {3, 4, 4, 5};
  c.decoder_channels = {4, 3, 2, 1};
  return c;
}

StoredDataset synthetic_dataset(std::size_t n, std::uint64_t seed = 7) {
  std::vector<Wavetable> tables;
  std::vector<std::string> sources;
  for (const SyntheticTable& s : synthetic_corpus(n, seed)) {
    tables.push_back(normalize_table(resample_to_table(s.samples), s.name, tables.size()));
    sources.push_back(s.name + ".wav");
  }
  return make_dataset(std::move(tables), std::move(sources));
}

TrainConfig small_train_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.model = small_config();
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.seed = 11;
  cfg.val_every = 2;
  cfg.adam.lr = 1e-3;
  return cfg;
}

}  // namespace

TEST_CASE("adam: zero gradient is a fixed point that still counts the step") {
  std::vector<ad::Parameter<double>> params;
  params.emplace_back("w", ad::Shape{3, 1, 1});
  params[0].value.values = {1.0, -2.0, 0.5};
  Adam<double> adam(params);
  adam.step(params);
  adam.step(params);
  CHECK(adam.steps() == 2);
  CHECK(params[0].value.values == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam: first step moves every coordinate by about lr") {
  std::vector<ad::Parameter<double>> params;
  params.emplace_back("w", ad::Shape{4, 1, 1});
  params[0].value.values = {0.0, 1.0, 2.0, 3.0};
  for (double& g : params[0].grad.values) g = 0.37;
  Adam<double> adam(params);
  adam.step(params);
  for (std::size_t i = 0; i < 4; ++i) {
    const double delta = params[0].value.values[i] - static_cast<double>(i);
    // m_hat / sqrt(v_hat) = g / |g| exactly, so |delta| = lr * |g| / (|g| + eps).
    CHECK_THAT(delta, WithinAbs(-1e-4 * 0.37 / (0.37 + 1e-8), 1e-15));
  }
}

TEST_CASE("adam: minimizes (p - 3)^2 from 0 within 20000 steps") {
  std::vector<ad::Parameter<double>> params;
  params.emplace_back("p", ad::Shape{1, 1, 1});
  AdamConfig cfg;
  cfg.lr = 1e-3;
  Adam<double> adam(params, cfg);
  for (int t = 0; t < 20000; ++t) {
    params[0].grad.values[0] = 2.0 * (params[0].value.values[0] - 3.0);
    adam.step(params);
  }
  CHECK(std::abs(params[0].value.values[0] - 3.0) < 1e-3);
}

TEST_CASE("adam: non-finite gradient aborts without touching state") {
  std::vector<ad::Parameter<float>> params;
  params.emplace_back("enc.w0", ad::Shape{2, 1, 1});
  params.emplace_back("enc.b0", ad::Shape{2, 1, 1});
  params[0].value.values = {0.5f, 0.25f};
  params[0].grad.values = {1.0f, 1.0f};
  params[1].grad.values = {std::nanf(""), 0.0f};
  Adam<float> adam(params);
  CHECK_THROWS_WITH(adam.step(params), ContainsSubstring("enc.b0"));
  CHECK(adam.steps() == 0);
  CHECK(params[0].value.values == std::vector<float>{0.5f, 0.25f});
  params[1].grad.values[0] = 0.0f;
  adam.step(params);
  CHECK(adam.steps() == 1);
}

TEST_CASE("train: zero epochs returns the initialized model") {
  const StoredDataset data = synthetic_dataset(12);
  const TrainConfig cfg = small_train_config(0);
  const TrainResult r = train(cfg, data);
  CHECK(r.metrics.empty());
  CHECK(r.checkpoint.epochs_completed == 0);
  Cvae<float> init(cfg.model);
  init.initialize(cfg.seed);
  CHECK(r.checkpoint.parameters == init.to_blob());
  CHECK(r.checkpoint.model == cfg.model);
  CHECK(r.checkpoint.stats == data.stats);
}

TEST_CASE("train: identical seeds give byte-identical checkpoints and logs") {
  const StoredDataset data = synthetic_dataset(14);
  const fs::path dir = temp_dir("determinism");
  TrainConfig cfg = small_train_config(4);
  cfg.checkpoint = dir / "a.ckpt";
  cfg.metrics = dir / "a.csv";
  const TrainResult a = train(cfg, data);
  cfg.checkpoint = dir / "b.ckpt";
  cfg.metrics = dir / "b.csv";
  const TrainResult b = train(cfg, data);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(a.checkpoint.epochs_completed == 4);
  CHECK(a.checkpoint.metrics_digest == fnv1a_hex(metrics_csv(a.metrics)));

  // A different seed changes the result.
  cfg.seed = 12;
  cfg.checkpoint.clear();
  cfg.metrics.clear();
  CHECK(train(cfg, data).checkpoint.parameters != a.checkpoint.parameters);
  fs::remove_all(dir);
}

TEST_CASE("train: metric log reports the schedule and validation cadence") {
  const StoredDataset data = synthetic_dataset(12);
  TrainConfig cfg = small_train_config(5);
  cfg.schedule = {1e-4, 1e-1, 3.0};
  const TrainResult r = train(cfg, data);
  REQUIRE(r.metrics.size() == 5);
  for (const EpochMetrics& m : r.metrics) {
    CHECK(m.beta == beta_at(static_cast<double>(m.epoch), cfg.schedule));
    CHECK(std::isfinite(m.train_recon));
    CHECK(m.train_kl >= 0.0);
  }
  // val_every = 2: epochs 1 and 3, plus the last epoch.
  CHECK(std::isnan(r.metrics[0].val_recon));
  CHECK(!std::isnan(r.metrics[1].val_recon));
  CHECK(std::isnan(r.metrics[2].val_recon));
  CHECK(!std::isnan(r.metrics[3].val_recon));
  CHECK(!std::isnan(r.metrics[4].val_recon));

  const std::string csv = metrics_csv(r.metrics);
  CHECK(csv.rfind("epoch,beta,train_recon,train_kl,val_recon,val_kl\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("train: early stop from the callback records completed epochs") {
  const StoredDataset data = synthetic_dataset(12);
  const TrainConfig cfg = small_train_config(10);
  const TrainResult r = train(cfg, data, [](const EpochMetrics& m) { return m.epoch < 2; });
  CHECK(r.metrics.size() == 3);
  CHECK(r.checkpoint.epochs_completed == 3);
}

TEST_CASE("train: validation loss uses z = mu and is deterministic") {
  const StoredDataset data = synthetic_dataset(12);
  Cvae<float> model(small_config());
  model.initialize(5);
  const auto idx = data.dataset.indices(Split::train);
  const ValidationLoss a = validation_loss(model, data, idx, 3);
  const ValidationLoss again = validation_loss(model, data, idx, 3);
  CHECK(a.recon == again.recon);
  CHECK(a.kl == again.kl);
  // Batching only changes float summation order.
  const ValidationLoss b = validation_loss(model, data, idx, 5);
  CHECK_THAT(a.recon, WithinAbs(b.recon, 1e-5 * a.recon));
  CHECK_THAT(a.kl, WithinAbs(b.kl, 1e-5 * std::max(1.0, a.kl)));
  CHECK(std::isfinite(a.recon));
}

TEST_CASE("train: rejects an invalid config and a missing dataset") {
  const StoredDataset data = synthetic_dataset(12);
  TrainConfig cfg = small_train_config(1);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(cfg, data), Error);
  CHECK_THROWS_WITH(train(TrainConfig{}), ContainsSubstring("no dataset"));
}

TEST_CASE("checkpoint: save, load and save again is byte-identical") {
  const fs::path dir = temp_dir("roundtrip");
  Cvae<float> model;
  model.initialize(3);
  Checkpoint c = make_checkpoint(model, BetaSchedule{}, LabelStats{std::log(100.0), std::log(8000.0), 0.01, 0.4});
  c.train_seed = 9;
  c.epochs_completed = 17;
  c.metrics_digest = fnv1a_hex("abc");
  save_checkpoint(c, dir / "m.ckpt");
  const Checkpoint back = load_checkpoint(dir / "m.ckpt");
  CHECK(back == c);
  save_checkpoint(back, dir / "m2.ckpt");
  CHECK(slurp(dir / "m.ckpt") == slurp(dir / "m2.ckpt"));
  CHECK(fs::file_size(dir / "m.ckpt") > model.parameter_count() * 4);

  const Cvae<float> restored = model_from_checkpoint<float>(back);
  CHECK(restored.to_blob() == model.to_blob());
  CHECK(!fs::exists(dir / "m.ckpt.tmp"));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint: corrupt files are rejected with a reason") {
  Cvae<float> model(small_config());
  model.initialize(1);
  const std::string good = serialize_checkpoint(make_checkpoint(model, BetaSchedule{}, LabelStats{}));
  REQUIRE_NOTHROW(parse_checkpoint(good));

  SECTION("truncated blob") {
    CHECK_THROWS_WITH(parse_checkpoint(good.substr(0, good.size() - 6)), ContainsSubstring("truncated parameters"));
  }
  SECTION("wrong version") {
    std::string bad = good;
    bad[4] = 2;
    CHECK_THROWS_WITH(parse_checkpoint(bad), ContainsSubstring("unknown checkpoint version 2"));
  }
  SECTION("version edited inside the header") {
    std::string bad = good;
    const auto at = bad.find("\"format_version\":1");
    REQUIRE(at != std::string::npos);
    bad[at + 17] = '7';
    CHECK_THROWS_WITH(parse_checkpoint(bad), ContainsSubstring("unknown checkpoint version"));
  }
  SECTION("corrupt header") {
    std::string bad = good;
    bad[12] = '#';
    CHECK_THROWS_WITH(parse_checkpoint(bad), ContainsSubstring("corrupt header"));
  }
  SECTION("bad magic") {
    CHECK_THROWS_WITH(parse_checkpoint("XXXX" + good.substr(4)), ContainsSubstring("bad magic"));
  }
  SECTION("trailing bytes") {
    CHECK_THROWS_WITH(parse_checkpoint(good + "zz"), ContainsSubstring("trailing"));
  }
  SECTION("missing file") {
    CHECK_THROWS_WITH(load_checkpoint("/nonexistent/x.ckpt"), ContainsSubstring("cannot open"));
  }
}

TEST_CASE("checkpoint: identity kind carries no parameters") {
  Checkpoint c;
  c.kind = ModelKind::identity;
  const Checkpoint back = parse_checkpoint(serialize_checkpoint(c));
  CHECK(back.kind == ModelKind::identity);
  CHECK(back.parameters.empty());
  CHECK_THROWS_AS(model_from_checkpoint<float>(back), Error);
}

TEST_CASE("ingest: ten files split 8/1/1, empty directory fails, reruns match") {
  const fs::path dir = temp_dir("ingest");
  const fs::path wavs = dir / "wavs";
  fs::create_directories(wavs / "sub");
  const auto corpus = synthetic_corpus(10, 3);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::vector<float> s(corpus[i].samples.begin(), corpus[i].samples.end());
    const fs::path where = (i % 2 ? wavs / "sub" : wavs) / (std::to_string(i) + ".wav");
    wav::write_float(where, s, 44100);
  }
  {
    std::ofstream junk(wavs / "broken.wav");
    junk << "not a wav";
  }

  const IngestReport r = ingest_directory(wavs, 42);
  CHECK(r.skipped.size() == 1);
  CHECK_THAT(r.skipped[0], ContainsSubstring("broken.wav"));
  REQUIRE(r.data.dataset.tables.size() == 10);
  const auto& split = r.data.dataset.split;
  CHECK(std::count(split.begin(), split.end(), Split::train) == 8);
  CHECK(std::count(split.begin(), split.end(), Split::val) == 1);
  CHECK(std::count(split.begin(), split.end(), Split::test) == 1);

  save_dataset(r.data, dir / "a" / "manifest.json");
  save_dataset(ingest_directory(wavs, 42).data, dir / "b" / "manifest.json");
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  CHECK(slurp(dir / "a" / kTablesFileName) == slurp(dir / "b" / kTablesFileName));

  const StoredDataset back = load_dataset(dir / "a" / "manifest.json");
  CHECK(back.sources == r.data.sources);
  CHECK(back.dataset.split == r.data.dataset.split);
  CHECK(back.stats == r.data.stats);
  for (std::size_t i = 0; i < back.labels.size(); ++i) {
    CHECK(back.dataset.tables[i].samples == r.data.dataset.tables[i].samples);
    for (int l = 0; l < 3; ++l) CHECK(back.labels[i][l] == r.data.labels[i][l]);
  }

  fs::create_directories(dir / "empty");
  CHECK_THROWS_WITH(ingest_directory(dir / "empty"), ContainsSubstring("no readable"));
  CHECK_THROWS_WITH(ingest_directory(dir / "missing"), ContainsSubstring("not a directory"));
  fs::remove_all(dir);
}

TEST_CASE("dataset manifest: corrupt or mismatched files are reported") {
  const fs::path dir = temp_dir("manifest");
  save_dataset(synthetic_dataset(10), dir / "manifest.json");
  {
    std::ofstream out(dir / "bad.json");
    out << "{ nope";
  }
  CHECK_THROWS_WITH(load_dataset(dir / "bad.json"), ContainsSubstring("corrupt dataset manifest"));
  fs::resize_file(dir / kTablesFileName, 600 * 4 * 3);
  CHECK_THROWS_WITH(load_dataset(dir / "manifest.json"), ContainsSubstring("truncated table file"));
  fs::remove_all(dir);
}
