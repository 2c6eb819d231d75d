#pragma once

// RIFF/WAVE reading (PCM 8/16/24/32-bit integer, 32/64-bit float) and
// 32-bit float writing.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

namespace wtcvae::wav {

struct Audio {
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
  bool is_float = false;
  // Interleaved, scaled to [-1, 1] for integer formats.
  std::vector<double> samples;

  std::size_t frames() const { return channels == 0 ? 0 : samples.size() / channels; }
};

Audio read(const std::filesystem::path& path);

void write_float(const std::filesystem::path& path, std::span<const float> mono, std::uint32_t sample_rate);

// Incremental mono float writer; the RIFF sizes are patched on close().
class StreamWriter {
 public:
  StreamWriter(const std::filesystem::path& path, std::uint32_t sample_rate);
  ~StreamWriter();
  StreamWriter(const StreamWriter&) = delete;
  StreamWriter& operator=(const StreamWriter&) = delete;

  void append(std::span<const float> frames);
  void close();
  std::uint64_t frames_written() const { return frames_; }

 private:
  std::ofstream out_;
  std::uint64_t frames_ = 0;
  std::uint32_t sample_rate_ = 0;
  bool open_ = false;
};

}  // namespace wtcvae::wav
