#include "u1/labels.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace u1 {

std::string to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::centered: return "centered";
    case LabelKind::discrete: return "discrete";
    case LabelKind::uniform: return "uniform";
    case LabelKind::unit_circle: return "unit_circle";
  }
  return "unit_circle";
}

LabelKind parse_label_kind(const std::string& name) {
  if (name == "centered") return LabelKind::centered;
  if (name == "discrete") return LabelKind::discrete;
  if (name == "uniform") return LabelKind::uniform;
  if (name == "unit_circle") return LabelKind::unit_circle;
  throw std::invalid_argument("unknown label kind: " + name);
}

double standard_normal(std::mt19937_64& rng) {
  double u1 = unit_uniform(rng);
  while (u1 <= 0.0) u1 = unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<U1Label> gen_labels(const LabelConfig& config) {
  if (config.n_classes < 1) throw std::invalid_argument("n_classes must be >= 1");
  std::mt19937_64 rng(config.seed);
  std::vector<U1Label> labels(config.n_classes);
  for (std::size_t c = 0; c < config.n_classes; ++c) labels[c].class_id = static_cast<std::int64_t>(c);

  switch (config.kind) {
    case LabelKind::centered:
      break;
    case LabelKind::unit_circle:
      for (auto& l : labels) {
        l.theta = 2.0 * std::numbers::pi * unit_uniform(rng);
        l.x = std::cos(l.theta);
        l.y = std::sin(l.theta);
      }
      return labels;
    case LabelKind::uniform:
      for (auto& l : labels) {
        l.x = 2.0 * unit_uniform(rng) - 1.0;
        l.y = 2.0 * unit_uniform(rng) - 1.0;
      }
      break;
    case LabelKind::discrete: {
      constexpr std::array<std::pair<double, double>, 4> corners{
          {{1.0, 1.0}, {1.0, -1.0}, {-1.0, 1.0}, {-1.0, -1.0}}};
      std::vector<std::size_t> slot(config.n_classes);
      for (std::size_t c = 0; c < slot.size(); ++c) slot[c] = c % corners.size();
      for (std::size_t i = slot.size(); i > 1; --i) std::swap(slot[i - 1], slot[rng() % i]);
      for (std::size_t c = 0; c < slot.size(); ++c) {
        labels[c].x = corners[slot[c]].first;
        labels[c].y = corners[slot[c]].second;
      }
      break;
    }
  }
  for (auto& l : labels) l.theta = (l.x == 0.0 && l.y == 0.0) ? 0.0 : std::atan2(l.y, l.x);
  return labels;
}

nlohmann::json labels_json(const std::vector<U1Label>& labels, const LabelConfig& config) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : labels) {
    arr.push_back({{"class_id", l.class_id},
                   {"theta", l.theta},
                   {"x", l.x},
                   {"y", l.y},
                   {"kind", to_string(config.kind)},
                   {"seed", config.seed}});
  }
  return arr;
}

}  // namespace u1
