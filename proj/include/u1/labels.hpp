#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace u1 {

/// 2-parameter class label configurations: all at the origin, corners
/// (+-1, +-1), uniform on [-1, 1]^2, or uniform angles on the unit circle.
enum class LabelKind { centered, discrete, uniform, unit_circle };

std::string to_string(LabelKind kind);
LabelKind parse_label_kind(const std::string& name);

struct LabelConfig {
  LabelKind kind = LabelKind::unit_circle;
  std::uint64_t seed = 0;
  std::size_t n_classes = 1;
};

struct U1Label {
  std::int64_t class_id = 0;
  double theta = 0.0;  // atan2(y, x); 0 at the origin
  double x = 0.0;
  double y = 0.0;
};

/// Deterministic in (kind, seed, n_classes); one label per class, class ids 0..n-1.
std::vector<U1Label> gen_labels(const LabelConfig& config);

nlohmann::json labels_json(const std::vector<U1Label>& labels, const LabelConfig& config);

/// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal by Box-Muller over unit_uniform, identical on every platform.
double standard_normal(std::mt19937_64& rng);

}  // namespace u1
