#include "u1/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace u1::simd {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
      return detail::avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
      return detail::neon_table() != nullptr;
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("SIMD kernels not available: " + std::string(isa_name(isa)));
  }
  switch (isa) {
    case Isa::avx2: return *detail::avx2_table();
    case Isa::neon: return *detail::neon_table();
    case Isa::scalar: break;
  }
  return *detail::scalar_table();
}

Isa best_supported_isa() {
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  if (isa_supported(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("U1_SIMD")) {
    const std::string_view requested(env);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
      if (requested == isa_name(isa) && isa_supported(isa)) return isa;
    }
  }
  return best_supported_isa();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&kernels_for(initial_isa())};
  return slot;
}

std::atomic<Isa>& active_isa_slot() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

Isa active_isa() { return active_isa_slot().load(); }

void set_active_isa(Isa isa) {
  const KernelTable& table = kernels_for(isa);
  active_slot().store(&table);
  active_isa_slot().store(isa);
}

const KernelTable& active_kernels() { return *active_slot().load(std::memory_order_relaxed); }

}  // namespace u1::simd
