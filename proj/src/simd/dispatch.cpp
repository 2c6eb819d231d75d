#include <atomic>
#include <cstdlib>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include "wtcvae/simd/kernels.hpp"

namespace wtcvae::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool cpu_has_avx512() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx512f");
#else
  return false;
#endif
}

Isa initial_isa() {
  Isa isa = detect_isa();
  if (const char* env = std::getenv("WTCVAE_ISA")) {
    const std::string want(env);
    for (const Isa cand : {Isa::scalar, Isa::avx2, Isa::avx512}) {
      if (want == isa_name(cand) && isa_available(cand)) isa = cand;
    }
  }
  return isa;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::avx512: return "avx512";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return detail::avx2_compiled() && cpu_has_avx2();
    case Isa::avx512: return detail::avx512_compiled() && cpu_has_avx512();
  }
  return false;
}

Isa detect_isa() {
  if (isa_available(Isa::avx512)) return Isa::avx512;
  return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("ISA not available on this machine: " + std::string(isa_name(isa)));
  }
  current().store(isa, std::memory_order_relaxed);
}

template <class T>
const Kernels<T>& kernels(Isa isa) {
  switch (isa) {
    case Isa::avx2: return detail::avx2_kernels<T>();
    case Isa::avx512: return detail::avx512_kernels<T>();
    default: return detail::scalar_kernels<T>();
  }
}

template const Kernels<float>& kernels<float>(Isa);
template const Kernels<double>& kernels<double>(Isa);

}  // namespace wtcvae::simd
