#include "wtcvae/synth/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wtcvae::synth {

void EngineConfig::validate() const {
  if (!(sample_rate > 0.0)) throw Error("engine: sample rate must be positive");
  if (voices < 1) throw Error("engine: need at least one voice");
  if (adsr.attack_s < 0 || adsr.decay_s < 0 || adsr.release_s < 0) throw Error("engine: negative envelope time");
  if (adsr.sustain < 0 || adsr.sustain > 1) throw Error("engine: sustain must be in [0, 1]");
  if (crossfade_ms < 0) throw Error("engine: negative crossfade time");
  if (command_capacity < 2) throw Error("engine: command queue too small");
}

double midi_to_hz(int midi) { return 440.0 * std::exp2((midi - 69) / 12.0); }

Engine::Engine(EngineConfig config, std::span<const float> initial_table)
    : config_(config),
      commands_(config.command_capacity),
      voices_(config.voices),
      cur_(std::make_unique<Table>()),
      next_(std::make_unique<Table>()),
      spare_(std::make_unique<Table>()) {
  config_.validate();
  if (!initial_table.empty()) {
    if (initial_table.size() != kTableLength) throw Error("engine: initial table must have 600 samples");
    std::copy(initial_table.begin(), initial_table.end(), cur_->begin());
  }
  const double fs = config_.sample_rate;
  fade_frames_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config_.crossfade_ms * 1e-3 * fs)));
  // Zero-length segments complete in one frame.
  attack_step_ = config_.adsr.attack_s * fs >= 1.0 ? 1.0 / (config_.adsr.attack_s * fs) : 1.0;
  decay_step_ = config_.adsr.decay_s * fs >= 1.0 ? (1.0 - config_.adsr.sustain) / (config_.adsr.decay_s * fs) : 1.0;
  release_samples_ = config_.adsr.release_s * fs;
  gain_ = config_.master_gain;
  cutoff_hz_ = config_.cutoff_hz;
  update_filter_coefficient();
}

bool Engine::push(const Command& c) { return commands_.push(c); }

bool Engine::note_on(int midi, float velocity) {
  if (midi < 0 || midi > 127) return false;
  return push({CmdType::note_on, midi, velocity, midi_to_hz(midi)});
}

bool Engine::note_off(int midi) { return push({CmdType::note_off, midi, 0.0f, 0.0}); }

bool Engine::note_on_frequency(double hz, float velocity, int key) {
  if (!(hz > 0.0)) return false;
  return push({CmdType::note_on, key, velocity, hz});
}

bool Engine::set_filter(double cutoff_hz) { return push({CmdType::filter, 0, 0.0f, cutoff_hz}); }
bool Engine::set_master_gain(double gain) { return push({CmdType::gain, 0, 0.0f, gain}); }
bool Engine::all_notes_off() { return push({CmdType::all_off, 0, 0.0f, 0.0}); }

std::uint64_t Engine::publish_table(std::span<const float> samples) {
  if (samples.size() != kTableLength) throw Error("publish_table: expected 600 samples");
  const std::uint64_t gen = next_generation_.fetch_add(1);
  Published& slot = mailbox_.back();
  std::copy(samples.begin(), samples.end(), slot.samples.begin());
  slot.generation = gen;
  mailbox_.publish();
  return gen;
}

SwapEvent Engine::last_swap() const {
  for (;;) {
    const std::uint64_t g = swap_generation_.load(std::memory_order_acquire);
    const std::int64_t t = swap_time_ns_.load(std::memory_order_acquire);
    if (swap_generation_.load(std::memory_order_acquire) == g) {
      return {g, std::chrono::steady_clock::time_point(std::chrono::nanoseconds(t))};
    }
  }
}

std::size_t Engine::active_voices() const {
  return static_cast<std::size_t>(std::count_if(voices_.begin(), voices_.end(), [](const Voice& v) { return v.active(); }));
}

void Engine::update_filter_coefficient() {
  const double nyquist = 0.5 * config_.sample_rate;
  lp_coeff_ = (cutoff_hz_ > 0.0 && cutoff_hz_ < nyquist)
                  ? 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz_ / config_.sample_rate)
                  : 1.0;
}

void Engine::start_voice(double hz, float velocity, int key) {
  // Free voice first; otherwise the voice whose release began earliest;
  // otherwise the oldest held note.
  Voice* pick = nullptr;
  for (Voice& v : voices_) {
    if (!v.active()) {
      pick = &v;
      break;
    }
  }
  if (pick == nullptr) {
    for (Voice& v : voices_) {
      if (v.released != 0 && (pick == nullptr || v.released < pick->released)) pick = &v;
    }
  }
  if (pick == nullptr) {
    for (Voice& v : voices_) {
      if (pick == nullptr || v.started < pick->started) pick = &v;
    }
  }
  Voice& v = *pick;
  v.pos = 0.0;
  v.freq_hz = hz;
  v.increment = hz * static_cast<double>(kTableLength) / config_.sample_rate;
  v.velocity = std::clamp(velocity, 0.0f, 1.0f);
  v.key = key;
  v.gate = true;
  v.stage = EnvStage::attack;
  v.level = 0.0;
  v.release_step = 0.0;
  v.started = ++note_counter_;
  v.released = 0;
}

void Engine::release_voice(Voice& v) {
  v.gate = false;
  v.released = ++note_counter_;
  if (release_samples_ >= 1.0) {
    v.stage = EnvStage::release;
    v.release_step = v.level / release_samples_;
  } else {
    v.stage = EnvStage::idle;
    v.level = 0.0;
  }
}

void Engine::apply(const Command& c) {
  switch (c.type) {
    case CmdType::note_on:
      start_voice(c.value, c.velocity, c.key);
      break;
    case CmdType::note_off:
      for (Voice& v : voices_) {
        if (v.gate && v.key == c.key) release_voice(v);
      }
      break;
    case CmdType::filter:
      cutoff_hz_ = c.value;
      update_filter_coefficient();
      break;
    case CmdType::gain:
      gain_ = c.value;
      break;
    case CmdType::all_off:
      for (Voice& v : voices_) {
        if (v.gate) release_voice(v);
      }
      break;
  }
}

void Engine::take_new_table(const Published& p) {
  if (fading_) {
    // Freeze the current blend as the outgoing table and restart the fade.
    // Linear interpolation commutes with the blend, so the output does not jump.
    const float w = static_cast<float>(fade_pos_);
    for (std::size_t i = 0; i < kTableLength; ++i) (*spare_)[i] = (1.0f - w) * (*cur_)[i] + w * (*next_)[i];
    std::swap(cur_, spare_);
  }
  *next_ = p.samples;
  fading_ = true;
  fade_pos_ = 0.0;
  fade_count_ = 0;
  pending_generation_ = p.generation;
  announce_ = true;
}

double Engine::envelope(Voice& v) {
  switch (v.stage) {
    case EnvStage::attack:
      v.level += attack_step_;
      if (v.level >= 1.0) {
        v.level = 1.0;
        v.stage = EnvStage::decay;
      }
      break;
    case EnvStage::decay:
      v.level -= decay_step_;
      if (v.level <= config_.adsr.sustain) {
        v.level = config_.adsr.sustain;
        v.stage = EnvStage::sustain;
      }
      break;
    case EnvStage::sustain:
      break;
    case EnvStage::release:
      v.level -= v.release_step;
      if (v.level <= 0.0) {
        v.level = 0.0;
        v.stage = EnvStage::idle;
      }
      break;
    case EnvStage::idle:
      v.level = 0.0;
      break;
  }
  return v.level;
}

namespace {

inline double lerp_table(const Table& t, std::size_t i, std::size_t j, double frac) {
  const double a = t[i];
  return a + frac * (static_cast<double>(t[j]) - a);
}

}  // namespace

void Engine::render(std::span<float> out) {
  Command c;
  while (commands_.pop(c)) apply(c);
  if (mailbox_.consume()) take_new_table(mailbox_.front());

  constexpr auto len = static_cast<double>(kTableLength);
  for (float& frame : out) {
    double w = 0.0;
    if (fading_) {
      ++fade_count_;
      fade_pos_ = static_cast<double>(fade_count_) / static_cast<double>(fade_frames_);
      w = fade_pos_;
    }
    double mix = 0.0;
    for (Voice& v : voices_) {
      if (!v.active()) continue;
      const double env = envelope(v);
      const auto i = static_cast<std::size_t>(v.pos);
      const std::size_t j = i + 1 == kTableLength ? 0 : i + 1;
      const double frac = v.pos - static_cast<double>(i);
      double s = lerp_table(*cur_, i, j, frac);
      if (fading_) s = (1.0 - w) * s + w * lerp_table(*next_, i, j, frac);
      mix += s * env * static_cast<double>(v.velocity);
      v.pos += v.increment;
      if (v.pos >= len) v.pos = v.increment < len ? v.pos - len : std::fmod(v.pos, len);
    }
    if (lp_coeff_ < 1.0) {
      lp_state_ += lp_coeff_ * (mix - lp_state_);
      mix = lp_state_;
    }
    frame = static_cast<float>(mix * gain_);
    if (fading_ && fade_count_ == fade_frames_) {
      std::swap(cur_, next_);
      fading_ = false;
    }
  }
  if (announce_) {
    // The block's first frame already carries the new table.
    const auto now = std::chrono::steady_clock::now().time_since_epoch();
    swap_time_ns_.store(std::chrono::duration_cast<std::chrono::nanoseconds>(now).count(), std::memory_order_release);
    swap_generation_.store(pending_generation_, std::memory_order_release);
    announce_ = false;
  }
}

}  // namespace wtcvae::synth
