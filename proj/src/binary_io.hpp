#pragma once

// Little-endian scalar and f32 array I/O shared by the dataset and checkpoint
// formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace wtcvae::binio {

template <class U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xff));
    return out;
  }
  return v;
}

inline void write_u32(std::ostream& o, std::uint32_t v) {
  v = to_little(v);
  o.write(reinterpret_cast<const char*>(&v), 4);
}

inline bool read_u32(std::istream& in, std::uint32_t& v) {
  if (!in.read(reinterpret_cast<char*>(&v), 4)) return false;
  v = to_little(v);
  return true;
}

inline void write_f32(std::ostream& o, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    o.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
  } else {
    for (const float f : values) write_u32(o, std::bit_cast<std::uint32_t>(f));
  }
}

// Reads up to values.size() floats; returns how many were complete.
inline std::size_t read_f32(std::istream& in, std::span<float> values) {
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
  const auto got = static_cast<std::size_t>(in.gcount()) / 4;
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < got; ++i) {
      values[i] = std::bit_cast<float>(to_little(std::bit_cast<std::uint32_t>(values[i])));
    }
  }
  return got;
}

}  // namespace wtcvae::binio
