#include "wtcvae/wav.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <string>

#include "wtcvae/common.hpp"

namespace wtcvae::wav {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void write_header(std::ostream& out, std::uint32_t sample_rate, std::uint32_t data_bytes) {
  out.write("RIFF", 4);
  put<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, kFormatFloat);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, sample_rate);
  put<std::uint32_t>(out, sample_rate * 4);
  put<std::uint16_t>(out, 4);
  put<std::uint16_t>(out, 32);
  out.write("data", 4);
  put<std::uint32_t>(out, data_bytes);
}

}  // namespace

Audio read(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(name + ": cannot open file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(name + ": not a RIFF/WAVE file");
  }

  Audio audio;
  std::uint16_t format = 0;
  std::uint16_t block_align = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || avail < 16) throw Error(name + ": truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = u16(f);
      audio.channels = u16(f + 2);
      audio.sample_rate = u32(f + 4);
      block_align = u16(f + 12);
      audio.bits_per_sample = u16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40 || avail < 40) throw Error(name + ": truncated extensible fmt chunk");
        format = u16(f + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min(size, avail);
    }
    pos = body + size + (size & 1);
  }

  if (format == 0) throw Error(name + ": missing fmt chunk");
  if (data == nullptr) throw Error(name + ": missing data chunk");
  if (audio.channels == 0) throw Error(name + ": zero channels");
  const std::uint16_t bits = audio.bits_per_sample;
  const bool pcm_ok = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format == kFormatFloat && (bits == 32 || bits == 64);
  if (!pcm_ok && !float_ok) {
    throw Error(name + ": unsupported sample format (format " + std::to_string(format) + ", " +
                std::to_string(bits) + " bits)");
  }
  audio.is_float = float_ok;
  const std::size_t width = bits / 8;
  if (block_align != width * audio.channels) throw Error(name + ": inconsistent block alignment");

  const std::size_t count = data_size / width;
  audio.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* s = data + i * width;
    double v = 0.0;
    if (float_ok && bits == 32) {
      float f;
      std::memcpy(&f, s, 4);
      v = f;
    } else if (float_ok) {
      std::memcpy(&v, s, 8);
    } else if (bits == 8) {
      v = (static_cast<int>(s[0]) - 128) / 128.0;
    } else if (bits == 16) {
      v = static_cast<std::int16_t>(u16(s)) / 32768.0;
    } else if (bits == 24) {
      std::int32_t x = static_cast<std::int32_t>(s[0] | (s[1] << 8) | (s[2] << 16));
      if (x & 0x800000) x -= 0x1000000;
      v = x / 8388608.0;
    } else {
      v = static_cast<std::int32_t>(u32(s)) / 2147483648.0;
    }
    audio.samples[i] = v;
  }
  return audio;
}

void write_float(const std::filesystem::path& path, std::span<const float> mono, std::uint32_t sample_rate) {
  StreamWriter w(path, sample_rate);
  w.append(mono);
  w.close();
}

StreamWriter::StreamWriter(const std::filesystem::path& path, std::uint32_t sample_rate)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(path.string() + ": cannot open for writing");
  write_header(out_, sample_rate, 0);
  open_ = true;
  sample_rate_ = sample_rate;
}

StreamWriter::~StreamWriter() {
  try {
    close();
  } catch (...) {
  }
}

void StreamWriter::append(std::span<const float> frames) {
  out_.write(reinterpret_cast<const char*>(frames.data()), static_cast<std::streamsize>(frames.size_bytes()));
  frames_ += frames.size();
}

void StreamWriter::close() {
  if (!open_) return;
  open_ = false;
  const auto data_bytes = static_cast<std::uint32_t>(frames_ * 4);
  out_.seekp(0);
  write_header(out_, sample_rate_, data_bytes);
  out_.close();
  if (!out_) throw Error("failed to finalize WAV file");
}

}  // namespace wtcvae::wav
