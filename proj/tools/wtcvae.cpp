// Command-line entry point: ingest, train, eval, generate, bench, serve.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "wtcvae/checkpoint.hpp"
#include "wtcvae/config.hpp"
#include "wtcvae/dataset_io.hpp"
#include "wtcvae/evaluator.hpp"
#include "wtcvae/synth/service.hpp"
#include "wtcvae/trainer.hpp"
#include "wtcvae/wav.hpp"

namespace fs = std::filesystem;
using namespace wtcvae;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_file_atomic(p, text);
}

json labels_json(const SemanticLabels& l) { return {{"bright", l.bright}, {"warm", l.warm}, {"rich", l.rich}}; }

std::optional<Split> parse_split(const std::string& s) {
  if (s == "all") return std::nullopt;
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw Error("unknown split '" + s + "' (train, val, test, all)");
}

const std::map<std::string, std::string> kSplitNames = {
    {"train", "train"}, {"val", "val"}, {"test", "test"}, {"all", "all"}};

// ---------------------------------------------------------------- ingest
struct IngestArgs {
  fs::path dir, out;
  std::uint64_t seed = kDefaultSplitSeed;
  fs::path labels_csv, identity;
};

int run_ingest(const IngestArgs& a) {
  const IngestReport rep = ingest_directory(a.dir, a.seed);
  for (const std::string& s : rep.skipped) std::fprintf(stderr, "skipped: %s\n", s.c_str());
  save_dataset(rep.data, a.out);
  if (!a.labels_csv.empty()) write_labels_csv(rep.data, a.labels_csv);
  if (!a.identity.empty()) {
    Checkpoint id;
    id.kind = ModelKind::identity;
    id.stats = rep.data.stats;
    id.split_seed = a.seed;
    save_checkpoint(id, a.identity);
  }
  const Dataset& d = rep.data.dataset;
  std::printf("%s\n", json{{"manifest", a.out.string()},
                           {"tables", d.tables.size()},
                           {"train", d.indices(Split::train).size()},
                           {"val", d.indices(Split::val).size()},
                           {"test", d.indices(Split::test).size()},
                           {"skipped", rep.skipped.size()}}
                          .dump()
                          .c_str());
  return 0;
}

// ----------------------------------------------------------------- train
struct TrainArgs {
  fs::path config;
  bool desk_scale = false;
  std::optional<std::string> dataset, checkpoint, metrics;
  std::optional<std::size_t> epochs, batch_size, train_subset, val_every, checkpoint_every;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::size_t log_every = 10;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (a.desk_scale) cfg.apply_desk_scale();
  if (!a.config.empty()) cfg = parse_train_config(slurp(a.config), cfg);
  if (a.dataset) cfg.dataset = *a.dataset;
  if (a.checkpoint) cfg.checkpoint = *a.checkpoint;
  if (a.metrics) cfg.metrics = *a.metrics;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.train_subset) cfg.train_subset = *a.train_subset;
  if (a.val_every) cfg.val_every = *a.val_every;
  if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
  if (a.seed) cfg.seed = *a.seed;
  if (a.lr) cfg.adam.lr = *a.lr;
  if (cfg.dataset.empty()) throw Error("train: no dataset (--dataset or \"dataset\" in the config)");
  if (cfg.checkpoint.empty()) throw Error("train: no checkpoint path (--checkpoint or \"checkpoint\" in the config)");
  cfg.validate();

  std::printf("effective config:\n%s\n", dump_train_config(cfg).c_str());
  std::fflush(stdout);
  const std::size_t every = std::max<std::size_t>(1, a.log_every);
  const TrainResult r = train(cfg, [&](const EpochMetrics& m) {
    if (m.epoch % every == 0 || m.epoch + 1 == cfg.epochs) {
      std::fprintf(stderr, "epoch %zu beta %.3e recon %.5f kl %.4f", m.epoch, m.beta, m.train_recon, m.train_kl);
      if (!std::isnan(m.val_recon)) std::fprintf(stderr, " val_recon %.5f val_kl %.4f", m.val_recon, m.val_kl);
      std::fprintf(stderr, "\n");
    }
    return true;
  });
  json summary = {{"checkpoint", cfg.checkpoint.string()},
                  {"epochs", r.checkpoint.epochs_completed},
                  {"seconds", r.seconds}};
  if (!r.metrics.empty()) {
    summary["first_train_recon"] = r.metrics.front().train_recon;
    summary["final_train_recon"] = r.metrics.back().train_recon;
  }
  std::printf("%s\n", summary.dump().c_str());
  return 0;
}

// ------------------------------------------------------------------ eval
struct EvalArgs {
  fs::path checkpoint, dataset, report, traces;
  std::string split = "test";
  std::string recon_split = "val";
  std::size_t steps = 20;
  bool no_sweep = false;
};

int run_eval(const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const StoredDataset data = load_dataset(a.dataset);
  auto gen = make_generator(ckpt);
  const auto recon_idx = evaluation_indices(data, parse_split(a.recon_split));
  const ReconstructionReport rec = reconstruction_mae(*gen, data, recon_idx, data.stats);
  json out = {{"checkpoint", a.checkpoint.string()},
              {"reconstruction", {{"split", a.recon_split}, {"report", json::parse(to_json(rec))}}}};
  if (!a.no_sweep) {
    const auto idx = evaluation_indices(data, parse_split(a.split));
    const ControllabilityReport ctrl = controllability_sweep(*gen, data, idx, data.stats, a.steps);
    out["controllability"] = {{"split", a.split}, {"report", json::parse(to_json(ctrl))}};
    if (!a.traces.empty()) write_text(a.traces, traces_csv(ctrl));
  }
  const std::string text = out.dump(2);
  if (!a.report.empty()) write_text(a.report, text + "\n");
  std::printf("%s\n", text.c_str());
  return 0;
}

// -------------------------------------------------------------- generate
struct GenerateArgs {
  fs::path checkpoint, dataset, out;
  std::size_t table = 0;
  std::optional<double> bright, warm, rich;
  bool raw = false;
};

int run_generate(const GenerateArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const StoredDataset data = load_dataset(a.dataset);
  if (a.table >= data.dataset.tables.size()) {
    throw Error("no table with id " + std::to_string(a.table) + " (dataset has " +
                std::to_string(data.dataset.tables.size()) + ")");
  }
  const auto& x = data.dataset.tables[a.table].samples;
  const SemanticLabels own = compute_labels(x, data.stats);
  SemanticLabels target = own;
  if (a.bright) target.bright = *a.bright;
  if (a.warm) target.warm = *a.warm;
  if (a.rich) target.rich = *a.rich;
  auto gen = make_generator(ckpt);
  std::vector<float> y = gen->generate(x, own, target);
  if (!a.raw) {
    const std::vector<double> yd(y.begin(), y.end());
    y = normalize_table(yd).samples;
  }
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  wav::write_float(a.out, y, 44100);
  std::printf("%s\n", json{{"table", a.table},
                           {"out", a.out.string()},
                           {"frames", y.size()},
                           {"own", labels_json(own)},
                           {"requested", labels_json(target)},
                           {"labels", labels_json(compute_labels(y, data.stats))}}
                          .dump()
                          .c_str());
  return 0;
}

// ----------------------------------------------------------------- bench
struct BenchArgs {
  fs::path checkpoint, dataset, report;
  std::size_t table = 0, runs = 100, warmup = 10;
};

int run_bench(const BenchArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const StoredDataset data = load_dataset(a.dataset);
  if (a.table >= data.dataset.tables.size()) throw Error("no table with id " + std::to_string(a.table));
  auto gen = make_generator(ckpt);
  const auto& x = data.dataset.tables[a.table].samples;
  const BenchmarkReport r = benchmark_generation(*gen, x, compute_labels(x, data.stats), a.runs, a.warmup);
  std::printf("runs %zu warmup %zu\nmean_ms %.4f\np95_ms %.4f\n", r.runs, r.warmup, r.mean_ms, r.p95_ms);
  if (!a.report.empty()) write_text(a.report, to_json(r) + "\n");
  return 0;
}

// ----------------------------------------------------------------- serve
struct ServeArgs {
  fs::path checkpoint, dataset, render_to;
  std::string bind = "127.0.0.1";
  unsigned short port = 8765;
  double duration = 0.0;
  std::size_t table = 0, block = 256;
};

int run_serve(const ServeArgs& a) {
  // Everything that can fail on input is checked before the port is bound.
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const StoredDataset data = load_dataset(a.dataset);
  if (a.render_to.empty()) {
    throw Error("this build has no audio device output; pass --render-to <file.wav> to run headless");
  }
  synth::ServiceConfig cfg;
  cfg.bind_address = a.bind;
  cfg.port = a.port;
  cfg.block_frames = a.block;
  cfg.initial_table = a.table;
  cfg.render_to = a.render_to;
  cfg.duration_s = a.duration;
  cfg.handle_signals = true;
  if (a.render_to.has_parent_path()) fs::create_directories(a.render_to.parent_path());
  synth::SynthService svc(cfg, make_generator(ckpt), synth::TableLibrary::from_dataset(data));
  const unsigned short port = svc.start();
  std::printf("listening on ws://%s:%u\n", a.bind.c_str(), static_cast<unsigned>(port));
  std::fflush(stdout);
  svc.wait();
  const synth::ServiceStats st = svc.stats();
  std::printf("%s\n", json{{"frames_rendered", st.frames_rendered},
                           {"frames_written", st.frames_written},
                           {"frames_dropped", st.frames_dropped},
                           {"regenerations", st.regenerations},
                           {"render_to", a.render_to.string()}}
                          .dump()
                          .c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-label conditioned wavetable CVAE: data, training, evaluation and live synthesis"};
  app.require_subcommand(1);

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Build a dataset manifest from a directory of single-cycle WAVs");
  ingest->add_option("--dir", ia.dir, "Directory of .wav files")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--out", ia.out, "Output manifest path (tables.f32 is written beside it)")->required();
  ingest->add_option("--seed", ia.seed, "Split seed");
  ingest->add_option("--labels-csv", ia.labels_csv, "Also write per-table labels as CSV");
  ingest->add_option("--identity-checkpoint", ia.identity,
                     "Also write an identity-model checkpoint (output = input) with the fitted stats");

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train the CVAE");
  trainc->add_option("--config", ta.config, "JSON config file")->check(CLI::ExistingFile);
  trainc->add_flag("--desk-scale", ta.desk_scale, "512 training tables, 2000 epochs (file and flags still override)");
  trainc->add_option("--dataset", ta.dataset, "Dataset manifest");
  trainc->add_option("--checkpoint", ta.checkpoint, "Output checkpoint");
  trainc->add_option("--metrics", ta.metrics, "Per-epoch metrics CSV");
  trainc->add_option("--epochs", ta.epochs, "Epochs");
  trainc->add_option("--batch-size", ta.batch_size, "Batch size")->check(CLI::PositiveNumber);
  trainc->add_option("--train-subset", ta.train_subset, "Use only the first N training tables (0 = all)");
  trainc->add_option("--val-every", ta.val_every, "Validation cadence in epochs");
  trainc->add_option("--checkpoint-every", ta.checkpoint_every, "Intermediate checkpoint cadence (0 = end only)");
  trainc->add_option("--seed", ta.seed, "Training seed");
  trainc->add_option("--lr", ta.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  trainc->add_option("--log-every", ta.log_every, "Progress line cadence in epochs");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Reconstruction MAE and label controllability");
  eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint")->required();
  eval->add_option("--dataset", ea.dataset, "Dataset manifest")->required();
  eval->add_option("--split", ea.split, "Split for the controllability sweep")->transform(CLI::IsMember(kSplitNames));
  eval->add_option("--recon-split", ea.recon_split, "Split for reconstruction MAE")->transform(CLI::IsMember(kSplitNames));
  eval->add_option("--steps", ea.steps, "Sweep points per label")->check(CLI::Range(2, 1000));
  eval->add_option("--report", ea.report, "Write the JSON report here too");
  eval->add_option("--traces", ea.traces, "Write per-step sweep traces as CSV");
  eval->add_flag("--no-sweep", ea.no_sweep, "Reconstruction only");

  GenerateArgs ga;
  auto* generate = app.add_subcommand("generate", "Regenerate one table with requested labels");
  generate->add_option("--checkpoint", ga.checkpoint, "Checkpoint")->required();
  generate->add_option("--dataset", ga.dataset, "Dataset manifest")->required();
  generate->add_option("--table", ga.table, "Base table id");
  generate->add_option("--bright", ga.bright, "Target bright in [0, 1] (default: the table's own)")->check(CLI::Range(0.0, 1.0));
  generate->add_option("--warm", ga.warm, "Target warm in [0, 1]")->check(CLI::Range(0.0, 1.0));
  generate->add_option("--rich", ga.rich, "Target rich in [0, 1]")->check(CLI::Range(0.0, 1.0));
  generate->add_option("--out", ga.out, "Output WAV (600 frames, 32-bit float)")->required();
  generate->add_flag("--raw", ga.raw, "Skip DC removal and peak normalization");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Time encode+decode of one table");
  bench->add_option("--checkpoint", ba.checkpoint, "Checkpoint")->required();
  bench->add_option("--dataset", ba.dataset, "Dataset manifest")->required();
  bench->add_option("--table", ba.table, "Table id");
  bench->add_option("--runs", ba.runs, "Timed runs")->check(CLI::PositiveNumber);
  bench->add_option("--warmup", ba.warmup, "Untimed warm-up runs");
  bench->add_option("--report", ba.report, "Write a JSON report with all statistics");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the synth with its WebSocket control service");
  serve->add_option("--checkpoint", sa.checkpoint, "Checkpoint")->required();
  serve->add_option("--dataset", sa.dataset, "Dataset manifest (the table library)")->required();
  serve->add_option("--port", sa.port, "TCP port (0 = any free port)");
  serve->add_option("--bind", sa.bind, "Bind address");
  serve->add_option("--render-to", sa.render_to, "Write the audio to this 32-bit float WAV");
  serve->add_option("--duration", sa.duration, "Stop after this many seconds of audio (0 = until SIGINT)")
      ->check(CLI::NonNegativeNumber);
  serve->add_option("--table", sa.table, "Initial table id");
  serve->add_option("--block", sa.block, "Render block size in frames")->check(CLI::Range(16, 8192));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return run_ingest(ia);
    if (*trainc) return run_train(ta);
    if (*eval) return run_eval(ea);
    if (*generate) return run_generate(ga);
    if (*bench) return run_bench(ba);
    if (*serve) return run_serve(sa);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
