#include <catch_amalgamated.hpp>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <boost/asio.hpp>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wtcvae/checkpoint.hpp"
#include "wtcvae/dataset_io.hpp"
#include "wtcvae/wav.hpp"

extern char** environ;

namespace fs = std::filesystem;
using nlohmann::json;
using Catch::Matchers::ContainsSubstring;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  static const fs::path d = [] {
    const auto p = fs::temp_directory_path() / "wtcvae_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

Run run(const std::string& args) {
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(WTCVAE_CLI) + " " + args + " 2>" + err.string();
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

// Small corpus, manifest and identity checkpoint shared by the tests.
const fs::path& fixture_dataset() {
  static const fs::path manifest = [] {
    const fs::path corpus = work_dir() / "corpus";
    const std::string cmd = std::string(WTCVAE_CORPUS) + " --out " + corpus.string() + " --count 20 --seed 8 >/dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
    const fs::path m = work_dir() / "ds" / "manifest.json";
    const Run r = run("ingest --dir " + corpus.string() + " --out " + m.string() + " --identity-checkpoint " +
                      (work_dir() / "identity.ckpt").string());
    REQUIRE(r.code == 0);
    return m;
  }();
  return manifest;
}

fs::path identity_ckpt() {
  fixture_dataset();
  return work_dir() / "identity.ckpt";
}

std::string ds_args() { return "--dataset " + fixture_dataset().string(); }

}  // namespace

TEST_CASE("cli ingest: ten files split 8/1/1, reruns are identical, empty dirs fail") {
  const fs::path corpus = work_dir() / "ten";
  REQUIRE(std::system((std::string(WTCVAE_CORPUS) + " --out " + corpus.string() + " --count 10 >/dev/null").c_str()) == 0);
  const Run a = run("ingest --dir " + corpus.string() + " --out " + (work_dir() / "ten_a" / "m.json").string());
  REQUIRE(a.code == 0);
  const json s = json::parse(a.out);
  CHECK(s["tables"] == 10);
  CHECK(s["train"] == 8);
  CHECK(s["val"] == 1);
  CHECK(s["test"] == 1);
  const Run b = run("ingest --dir " + corpus.string() + " --out " + (work_dir() / "ten_b" / "m.json").string());
  REQUIRE(b.code == 0);
  CHECK(slurp(work_dir() / "ten_a" / "tables.f32") == slurp(work_dir() / "ten_b" / "tables.f32"));
  const json ma = json::parse(slurp(work_dir() / "ten_a" / "m.json"));
  const json mb = json::parse(slurp(work_dir() / "ten_b" / "m.json"));
  CHECK(ma == mb);

  fs::create_directories(work_dir() / "empty");
  const Run e = run("ingest --dir " + (work_dir() / "empty").string() + " --out " + (work_dir() / "e.json").string());
  CHECK(e.code != 0);
  CHECK_THAT(e.err, ContainsSubstring("no readable"));
}

TEST_CASE("cli eval: identity checkpoint scores zero reconstruction error") {
  const Run r = run("eval --checkpoint " + identity_ckpt().string() + " " + ds_args() + " --recon-split test --steps 4 --report " +
                    (work_dir() / "eval.json").string() + " --traces " + (work_dir() / "traces.csv").string());
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["reconstruction"]["report"]["waveform_mae"] == 0.0);
  CHECK(j["reconstruction"]["report"]["logspec_mae"] == 0.0);
  CHECK(j["controllability"]["split"] == "test");
  CHECK(json::parse(slurp(work_dir() / "eval.json")) == j);
  CHECK(slurp(work_dir() / "traces.csv").rfind("label,table,step,requested,achieved\n", 0) == 0);
  // Deterministic output.
  CHECK(run("eval --checkpoint " + identity_ckpt().string() + " " + ds_args() + " --recon-split test --steps 4").out == r.out);
  CHECK(run("eval --checkpoint " + identity_ckpt().string() + " " + ds_args() + " --split nope").code != 0);
}

TEST_CASE("cli train: desk scale with overrides, config file values and the echoed config") {
  const fs::path ckpt = work_dir() / "train" / "model.ckpt";
  const fs::path cfg = work_dir() / "train.json";
  {
    std::ofstream(cfg) << R"({"config_version": 1, "batch_size": 4, "epochs": 5, "val_every": 1,
                              "model": {"latent_dim": 4, "encoder_channels": [3, 4, 4, 5], "decoder_channels": [4, 3, 2, 1]}})";
  }
  const Run r = run("train --desk-scale --config " + cfg.string() + " " + ds_args() + " --checkpoint " + ckpt.string() +
                    " --epochs 2 --seed 4");
  REQUIRE(r.code == 0);
  const std::size_t brace = r.out.find('{');
  const std::size_t end = r.out.find("\n}\n");
  REQUIRE(end != std::string::npos);
  const json echoed = json::parse(r.out.substr(brace, end + 2 - brace));
  CHECK(echoed["epochs"] == 2);            // flag beats file
  CHECK(echoed["batch_size"] == 4);        // file beats default
  CHECK(echoed["train_subset"] == 512);    // desk scale
  CHECK(echoed["seed"] == 4);
  CHECK(echoed["model"]["latent_dim"] == 4);
  const wtcvae::Checkpoint c = wtcvae::load_checkpoint(ckpt);
  CHECK(c.epochs_completed == 2);
  CHECK(c.train_seed == 4);
  CHECK(c.model.latent_dim == 4);

  std::ofstream(work_dir() / "bad.json") << R"({"epochz": 3})";
  const Run bad = run("train --config " + (work_dir() / "bad.json").string() + " " + ds_args() + " --checkpoint x.ckpt");
  CHECK(bad.code != 0);
  CHECK_THAT(bad.err, ContainsSubstring("epochz"));
  CHECK(run("train " + ds_args()).code != 0);  // no checkpoint path
}

TEST_CASE("cli generate: label validation, 600-frame output and recomputed labels") {
  const fs::path out = work_dir() / "gen" / "g.wav";
  const std::string base = "generate --checkpoint " + identity_ckpt().string() + " " + ds_args() + " --out " + out.string();
  const Run bad = run(base + " --bright 1.5");
  CHECK(bad.code != 0);
  CHECK_FALSE(fs::exists(out));
  CHECK(run(base + " --warm -0.1").code != 0);
  CHECK(run(base + " --table 999").code != 0);

  const Run r = run(base + " --table 3");
  REQUIRE(r.code == 0);
  const wtcvae::wav::Audio a = wtcvae::wav::read(out);
  CHECK(a.frames() == 600);
  CHECK(a.is_float);
  const json j = json::parse(r.out);
  for (const char* l : {"bright", "warm", "rich"}) {
    CHECK_THAT(j["labels"][l].get<double>(), Catch::Matchers::WithinAbs(j["requested"][l].get<double>(), 1e-6));
  }
}

TEST_CASE("cli bench: prints mean and p95 in milliseconds") {
  const Run r = run("bench --checkpoint " + identity_ckpt().string() + " " + ds_args() + " --runs 20 --warmup 2");
  REQUIRE(r.code == 0);
  CHECK(std::regex_search(r.out, std::regex(R"(^mean_ms [0-9.]+$)", std::regex::multiline)));
  CHECK(std::regex_search(r.out, std::regex(R"(^p95_ms [0-9.]+$)", std::regex::multiline)));
}

TEST_CASE("cli serve: input errors come before binding, headless runs and SIGINT exit cleanly") {
  // Hold a port; a missing checkpoint must be reported instead of the busy port.
  boost::asio::io_context io;
  boost::asio::ip::tcp::acceptor held(io, {boost::asio::ip::make_address("127.0.0.1"), 0});
  const auto port = std::to_string(held.local_endpoint().port());
  Run r = run("serve --checkpoint " + (work_dir() / "missing.ckpt").string() + " " + ds_args() + " --port " + port +
              " --render-to x.wav");
  CHECK(r.code != 0);
  CHECK_THAT(r.err, ContainsSubstring("missing.ckpt"));
  r = run("serve --checkpoint " + identity_ckpt().string() + " " + ds_args() + " --port " + port + " --render-to " +
          (work_dir() / "busy.wav").string());
  CHECK(r.code != 0);
  CHECK_THAT(r.err, ContainsSubstring("cannot listen"));
  r = run("serve --checkpoint " + identity_ckpt().string() + " " + ds_args() + " --port 0");
  CHECK(r.code != 0);
  CHECK_THAT(r.err, ContainsSubstring("--render-to"));

  const fs::path wav = work_dir() / "serve" / "d.wav";
  r = run("serve --checkpoint " + identity_ckpt().string() + " " + ds_args() + " --port 0 --duration 0.2 --render-to " +
          wav.string());
  REQUIRE(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("listening on ws://127.0.0.1:"));
  CHECK(wtcvae::wav::read(wav).frames() == 9600);

  const std::string ckpt = identity_ckpt().string(), manifest = fixture_dataset().string();
  const std::string sig_wav = (work_dir() / "serve" / "sig.wav").string();
  std::vector<std::string> args = {WTCVAE_CLI, "serve",  "--checkpoint", ckpt,       "--dataset",
                                   manifest,   "--port", "0",            "--render-to", sig_wav};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 1, "/dev/null", O_WRONLY, 0);
  REQUIRE(posix_spawn(&pid, WTCVAE_CLI, &actions, nullptr, argv.data(), environ) == 0);
  posix_spawn_file_actions_destroy(&actions);
  std::this_thread::sleep_for(std::chrono::milliseconds(700));
  REQUIRE(kill(pid, SIGINT) == 0);
  int status = 0;
  REQUIRE(waitpid(pid, &status, 0) == pid);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(wtcvae::wav::read(sig_wav).frames() > 0);
}
