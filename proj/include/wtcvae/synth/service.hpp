#pragma once

// Live regeneration and the WebSocket control service around Engine.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "wtcvae/dataset_io.hpp"
#include "wtcvae/evaluator.hpp"
#include "wtcvae/synth/engine.hpp"
#include "wtcvae/synth/protocol.hpp"

namespace wtcvae::synth {

struct LibraryEntry {
  std::string name;
  std::vector<float> samples;
  SemanticLabels labels;  // own labels under the library stats
};

struct TableLibrary {
  std::vector<LibraryEntry> entries;
  LabelStats stats;

  static TableLibrary from_dataset(const StoredDataset& data);
  protocol::Tables listing() const;
};

// Turns table/label requests into published tables on a worker thread.
// Requests coalesce: the worker always serves the most recent state, so a
// burst of slider moves costs at most one regeneration in flight plus one
// queued. The worker is the engine's only table publisher.
class Regenerator {
 public:
  using UpdateFn = std::function<void(const protocol::TableUpdate&)>;
  using ErrorFn = std::function<void(const std::string&)>;

  Regenerator(Engine& engine, std::unique_ptr<Generator> generator, const TableLibrary& library, UpdateFn on_update,
              ErrorFn on_error = {});
  ~Regenerator();
  Regenerator(const Regenerator&) = delete;
  Regenerator& operator=(const Regenerator&) = delete;

  // Regenerate the current base table with `target` labels.
  void request_labels(const SemanticLabels& target);
  // Switch the base table; it is published unchanged. False for unknown ids.
  bool request_table(std::size_t id);

  // Blocks until no request is pending or running.
  void wait_idle();
  std::uint64_t completed() const;
  std::size_t base_table() const;

 private:
  struct Request {
    std::size_t base = 0;
    SemanticLabels target;
    bool verbatim = true;
  };
  void worker();
  protocol::TableUpdate produce(const Request& r);

  Engine& engine_;
  std::unique_ptr<Generator> generator_;
  const TableLibrary& library_;
  UpdateFn on_update_;
  ErrorFn on_error_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  Request state_;
  bool dirty_ = false;
  bool busy_ = false;
  bool stop_ = false;
  std::uint64_t completed_ = 0;
  std::thread thread_;
};

struct ServiceConfig {
  std::string bind_address = "127.0.0.1";
  unsigned short port = 0;  // 0 picks a free port
  EngineConfig engine;
  std::size_t block_frames = 256;
  std::size_t initial_table = 0;
  std::filesystem::path render_to;  // empty: rendered audio is discarded
  double duration_s = 0.0;          // > 0: stop after this much audio
  bool handle_signals = false;      // SIGINT / SIGTERM request a clean stop
};

struct ServiceStats {
  std::uint64_t frames_rendered = 0;
  std::uint64_t frames_written = 0;
  std::uint64_t frames_dropped = 0;  // audio ring overflow
  std::uint64_t regenerations = 0;
};

class SynthService {
 public:
  SynthService(ServiceConfig config, std::unique_ptr<Generator> generator, TableLibrary library);
  ~SynthService();
  SynthService(const SynthService&) = delete;
  SynthService& operator=(const SynthService&) = delete;

  // Binds, then starts the io, render, writer and regeneration threads.
  // Returns the bound port. Throws Error if the address cannot be bound.
  unsigned short start();
  // Blocks until stop() is called, a signal arrives or the duration elapses,
  // then shuts everything down and finalizes the output file.
  void wait();
  // Thread-safe and idempotent.
  void stop();

  Engine& engine();
  Regenerator& regenerator();
  ServiceStats stats() const;

  struct Impl;  // opaque; public so the session type can name it

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace wtcvae::synth
