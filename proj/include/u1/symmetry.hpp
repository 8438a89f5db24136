#pragma once

// Measurements of rotational symmetry and its breaking: mean energy maps and
// their radial profile, locations of nearest-neighbor matches in centered
// image coordinates, circular statistics of those locations, and the split of
// match displacement variance into radial and tangential parts.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "u1/activation.hpp"
#include "u1/classifier.hpp"

namespace u1 {

struct RadialProfile {
  // One bin per distinct pixel radius present in the grid, ascending; bins
  // therefore cover [0, r_max] with no two cells of different radius mixed.
  std::vector<double> radius;
  std::vector<double> mean_energy;
  std::vector<double> asymmetry;
  std::vector<std::size_t> counts;
};

inline constexpr std::size_t kAngularSectors = 8;

/// asymmetry = max over non-empty 45-degree sectors of |sector mean - bin mean|
/// divided by (bin mean + 1e-300). The origin cell sits in sector 0.
RadialProfile radial_profile(const EnergyMap& energy);

struct EnergySummary {
  EnergyMap mean;
  RadialProfile profile;
};

/// Throws std::invalid_argument on an empty list, DataError on mixed H, W.
EnergySummary aggregate_energy(std::span<const ActivationMap> maps);

/// Energy-weighted mean location in centered coordinates.
CenteredCoord energy_centroid(const EnergyMap& energy);

enum class Pairing { all, same_class, cross_class };
enum class Weighting { uniform, kernel };

Pairing parse_pairing(const std::string& name);
Weighting parse_weighting(const std::string& name);
std::string to_string(Pairing pairing);
std::string to_string(Weighting weighting);

struct MatchPoint {
  std::string query_image;
  std::int64_t query_class = 0;
  std::size_t query_row = 0;
  std::size_t query_col = 0;
  CenteredCoord query;
  std::string memory_image;
  std::int64_t memory_class = 0;
  std::size_t memory_row = 0;
  std::size_t memory_col = 0;
  CenteredCoord memory;
  GridShape memory_shape;
  bool same_class = false;
  double weight = 1.0;  // kernel value f of the match
};

struct MatchSet {
  std::vector<MatchPoint> points;
  std::size_t retrieved = 0;  // before the pairing filter
  bool empty() const { return points.empty(); }
};

/// Every (query pixel, neighbor) pair from the classifier's retrieval,
/// filtered by pairing. Queries are processed in parallel; output order is
/// query order, then raster order, then neighbor rank.
MatchSet match_locations(std::span<const LabeledMap> queries, const MemoryBank& bank,
                         const ClassifierConfig& config, Pairing pairing,
                         std::size_t workers = 1);

struct WeightedPoint {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
};

inline constexpr double kUndefinedResultant = 1e-12;

struct AngularStats {
  std::size_t n = 0;         // points off the origin
  std::size_t n_origin = 0;  // excluded: angle undefined
  double mean_angle = 0.0;   // radians in (-pi, pi]; meaningless unless defined
  double resultant_length = 0.0;
  double circular_variance = 1.0;
  double rayleigh_z = 0.0;   // n * R^2
  bool defined = false;      // false when n == 0 or R <= kUndefinedResultant
};

AngularStats circular_stats(std::span<const WeightedPoint> points);
/// Angles of the matched memory locations x_nn.
AngularStats circular_stats(std::span<const MatchPoint> matches, Weighting weighting);

struct Histogram2D {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint64_t> counts;
  std::vector<double> probability;  // counts / total, all zero when empty
  std::uint64_t total = 0;
  bool empty() const { return total == 0; }
};

/// Histogram of matched memory locations over an H x W memory grid.
Histogram2D match_histogram(std::span<const MatchPoint> matches, std::size_t height,
                            std::size_t width);
/// Same, restricted to matches whose query pixel is (query_row, query_col).
Histogram2D conditional_match_distribution(std::span<const MatchPoint> matches,
                                           std::size_t query_row, std::size_t query_col,
                                           std::size_t height, std::size_t width);

/// Spatial variance of a histogram's mass around its mean location.
double histogram_spread(const Histogram2D& hist);

struct RadialTangential {
  double radial_variance = 0.0;
  double tangential_variance = 0.0;
  std::size_t n = 0;
  std::size_t n_origin = 0;  // query pixel at the origin: no radial direction
};

struct Displacement {
  CenteredCoord from;  // x_i
  CenteredCoord to;    // x_nn
};

RadialTangential radial_tangential_variance(std::span<const Displacement> displacements);
RadialTangential radial_tangential_variance(std::span<const MatchPoint> matches);

/// Smallest radius around the origin holding `fraction` of the match mass of
/// x_nn. Returns 0 for an empty set.
double confusion_radius(std::span<const MatchPoint> matches, Weighting weighting,
                        double fraction = 0.68);

struct ClassAngularRow {
  std::int64_t class_id = 0;
  AngularStats stats;
  RadialTangential radtan;
  double confusion_radius = 0.0;
};

/// One row per query class present in `matches`, ascending class_id.
std::vector<ClassAngularRow> angular_report(std::span<const MatchPoint> matches,
                                            Weighting weighting);

std::string angular_report_csv(std::span<const ClassAngularRow> rows);
std::string matches_csv(std::span<const MatchPoint> matches);
std::string radial_profile_csv(const RadialProfile& profile);
nlohmann::json to_json(const AngularStats& stats);
nlohmann::json to_json(const RadialTangential& rt);

}  // namespace u1
