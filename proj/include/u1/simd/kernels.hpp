#pragma once

// Vector arithmetic kernels behind the distance computations of the index,
// the classifier and the energy maps. Every kernel has a scalar reference
// implementation; vectorized variants are selected once at startup from what
// the CPU reports, and can be overridden with U1_SIMD=scalar|avx2|neon or
// set_active_isa().

#include <cstddef>
#include <span>
#include <string_view>

namespace u1::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  double (*squared_l2)(const double* a, const double* b, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_squares_f32)(const float* a, std::size_t n);
  // out[r] = ||q - rows[r]||^2 for a row-major table of `count` rows.
  void (*squared_l2_rows)(const double* q, const double* rows, std::size_t count,
                          std::size_t n, double* out);
};

/// True when the running CPU can execute kernels built for `isa`.
bool isa_supported(Isa isa);

/// Kernel table for a specific ISA. Throws std::invalid_argument when the ISA
/// was not compiled in or is not supported by the running CPU.
const KernelTable& kernels_for(Isa isa);

Isa best_supported_isa();
Isa active_isa();
void set_active_isa(Isa isa);

const KernelTable& active_kernels();

inline double squared_l2(std::span<const double> a, std::span<const double> b) {
  return active_kernels().squared_l2(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}

inline double sum_squares(std::span<const float> a) {
  return active_kernels().sum_squares_f32(a.data(), a.size());
}

namespace detail {
const KernelTable* scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();  // nullptr when not compiled in
}  // namespace detail

}  // namespace u1::simd
