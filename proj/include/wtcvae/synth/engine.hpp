#pragma once

// Polyphonic wavetable oscillator with per-voice ADSR, a global one-pole
// lowpass and master gain, and crossfaded table swaps.
//
// Threads: one control thread calls the note/filter/gain methods, one
// publisher thread calls publish_table, and one render thread calls render.
// render never blocks, allocates or performs I/O.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <boost/lockfree/spsc_queue.hpp>

#include "wtcvae/common.hpp"
#include "wtcvae/synth/triple_buffer.hpp"

namespace wtcvae::synth {

using Table = std::array<float, kTableLength>;

struct Adsr {
  double attack_s = 0.005;
  double decay_s = 0.05;
  double sustain = 0.8;
  double release_s = 0.15;
};

struct EngineConfig {
  double sample_rate = 48000.0;
  std::size_t voices = 8;
  Adsr adsr;
  double master_gain = 0.25;
  double crossfade_ms = 10.0;
  double cutoff_hz = 0.0;  // <= 0 or >= Nyquist bypasses the lowpass
  std::size_t command_capacity = 256;

  void validate() const;
};

double midi_to_hz(int midi);

enum class EnvStage { idle, attack, decay, sustain, release };

struct Voice {
  // Table position in samples, [0, 600); the phase in cycles is pos / 600.
  double pos = 0.0;
  double increment = 0.0;  // samples per frame
  double freq_hz = 0.0;
  float velocity = 0.0f;
  int key = -1;
  bool gate = false;
  EnvStage stage = EnvStage::idle;
  double level = 0.0;
  double release_step = 0.0;
  std::uint64_t started = 0;   // note_on order
  std::uint64_t released = 0;  // note_off order, 0 while held

  bool active() const { return stage != EnvStage::idle; }
  double phase() const { return pos / static_cast<double>(kTableLength); }
};

struct SwapEvent {
  std::uint64_t generation = 0;
  std::chrono::steady_clock::time_point when{};
};

class Engine {
 public:
  explicit Engine(EngineConfig config = {}, std::span<const float> initial_table = {});
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Control thread. Commands take effect at the start of the next render
  // call; false means the command queue is full and the command was dropped.
  bool note_on(int midi, float velocity);
  bool note_off(int midi);
  // Arbitrary frequency; `key` is what note_off matches.
  bool note_on_frequency(double hz, float velocity, int key);
  bool set_filter(double cutoff_hz);
  bool set_master_gain(double gain);
  bool all_notes_off();

  // Publisher thread. Copies `samples` (600 values) into the mailbox and
  // returns its generation id (strictly increasing from 1).
  std::uint64_t publish_table(std::span<const float> samples);

  // Render thread.
  void render(std::span<float> out);

  // Render-thread state; read only from the render thread or while it is
  // stopped.
  const std::vector<Voice>& voices() const { return voices_; }
  std::size_t active_voices() const;
  const Table& current_table() const { return *cur_; }
  bool crossfading() const { return fading_; }
  double crossfade_position() const { return fade_pos_; }
  double cutoff_hz() const { return cutoff_hz_; }
  double master_gain() const { return gain_; }
  const EngineConfig& config() const { return config_; }

  // Any thread: the latest generation whose crossfade has begun, and when its
  // first blended frame was produced.
  SwapEvent last_swap() const;
  std::uint64_t published_generation() const { return next_generation_.load() - 1; }

 private:
  enum class CmdType : std::uint8_t { note_on, note_off, filter, gain, all_off };
  struct Command {
    CmdType type = CmdType::note_on;
    int key = 0;
    float velocity = 0.0f;
    double value = 0.0;
  };
  struct Published {
    Table samples{};
    std::uint64_t generation = 0;
  };

  bool push(const Command& c);
  void apply(const Command& c);
  void start_voice(double hz, float velocity, int key);
  void release_voice(Voice& v);
  void take_new_table(const Published& p);
  void update_filter_coefficient();
  double envelope(Voice& v);

  EngineConfig config_;
  boost::lockfree::spsc_queue<Command> commands_;
  TripleBuffer<Published> mailbox_;
  std::atomic<std::uint64_t> next_generation_{1};

  // Render-thread state.
  std::vector<Voice> voices_;
  std::unique_ptr<Table> cur_, next_, spare_;
  bool fading_ = false;
  double fade_pos_ = 0.0;
  std::size_t fade_frames_ = 1;
  std::size_t fade_count_ = 0;
  std::uint64_t pending_generation_ = 0;
  bool announce_ = false;
  double cutoff_hz_ = 0.0;
  double lp_coeff_ = 1.0;
  double lp_state_ = 0.0;
  double gain_ = 1.0;
  std::uint64_t note_counter_ = 0;
  double attack_step_ = 1.0, decay_step_ = 1.0, release_samples_ = 0.0;

  std::atomic<std::uint64_t> swap_generation_{0};
  std::atomic<std::int64_t> swap_time_ns_{0};
};

}  // namespace wtcvae::synth
