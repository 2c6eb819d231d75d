#pragma once

// Single-writer single-reader triple buffer. The writer fills its private
// back slot and swaps it into the shared middle; the reader swaps the middle
// into its private front slot. Neither side ever blocks, and the reader only
// sees slots the writer has finished.

#include <array>
#include <atomic>
#include <cstdint>

namespace wtcvae::synth {

template <class T>
class TripleBuffer {
 public:
  TripleBuffer() = default;
  TripleBuffer(const TripleBuffer&) = delete;
  TripleBuffer& operator=(const TripleBuffer&) = delete;

  // Writer side.
  T& back() { return slots_[back_]; }
  void publish() {
    const std::uint8_t prev = middle_.exchange(static_cast<std::uint8_t>(back_ | kFresh), std::memory_order_acq_rel);
    back_ = prev & kIndex;
  }

  // Reader side. Returns true and updates front() when a new value arrived.
  bool consume() {
    if ((middle_.load(std::memory_order_relaxed) & kFresh) == 0) return false;
    const std::uint8_t prev = middle_.exchange(front_, std::memory_order_acq_rel);
    front_ = prev & kIndex;
    return true;
  }
  const T& front() const { return slots_[front_]; }

 private:
  static constexpr std::uint8_t kFresh = 0x4;
  static constexpr std::uint8_t kIndex = 0x3;

  std::array<T, 3> slots_{};
  std::uint8_t back_ = 0;
  std::uint8_t front_ = 1;
  std::atomic<std::uint8_t> middle_{2};
};

}  // namespace wtcvae::synth
