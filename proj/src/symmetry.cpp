#include "u1/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "u1/errors.hpp"
#include "u1/parallel.hpp"

namespace u1 {

namespace {

std::size_t sector_of(double x, double y) {
  if (x == 0.0 && y == 0.0) return 0;
  const double theta = std::atan2(y, x);  // [-pi, pi]
  const double step = 2.0 * std::numbers::pi / kAngularSectors;
  const auto s = static_cast<long>(std::floor((theta + step / 2.0) / step));
  return static_cast<std::size_t>((s % static_cast<long>(kAngularSectors) + kAngularSectors) %
                                  kAngularSectors);
}

// (2x)^2 + (2y)^2 is an exact integer for every grid cell.
long long radius_key(std::size_t row, std::size_t col, std::size_t height, std::size_t width) {
  const long long dx = 2LL * static_cast<long long>(col) - (static_cast<long long>(width) - 1);
  const long long dy = (static_cast<long long>(height) - 1) - 2LL * static_cast<long long>(row);
  return dx * dx + dy * dy;
}

}  // namespace

RadialProfile radial_profile(const EnergyMap& energy) {
  struct Bin {
    double sum = 0.0;
    std::size_t count = 0;
    double sector_sum[kAngularSectors] = {};
    std::size_t sector_count[kAngularSectors] = {};
  };
  std::map<long long, Bin> bins;
  for (std::size_t r = 0; r < energy.height; ++r) {
    for (std::size_t c = 0; c < energy.width; ++c) {
      const auto p = centered_coords(r, c, energy.height, energy.width);
      auto& bin = bins[radius_key(r, c, energy.height, energy.width)];
      const double e = energy.at(r, c);
      const std::size_t s = sector_of(p.x, p.y);
      bin.sum += e;
      ++bin.count;
      bin.sector_sum[s] += e;
      ++bin.sector_count[s];
    }
  }
  RadialProfile profile;
  for (const auto& [key, bin] : bins) {
    const double mean = bin.sum / static_cast<double>(bin.count);
    double worst = 0.0;
    for (std::size_t s = 0; s < kAngularSectors; ++s) {
      if (bin.sector_count[s] == 0) continue;
      const double sector_mean = bin.sector_sum[s] / static_cast<double>(bin.sector_count[s]);
      worst = std::max(worst, std::abs(sector_mean - mean));
    }
    profile.radius.push_back(std::sqrt(static_cast<double>(key)) / 2.0);
    profile.mean_energy.push_back(mean);
    profile.asymmetry.push_back(worst / (mean + 1e-300));
    profile.counts.push_back(bin.count);
  }
  return profile;
}

EnergySummary aggregate_energy(std::span<const ActivationMap> maps) {
  if (maps.empty()) throw std::invalid_argument("aggregate_energy needs at least one map");
  const std::size_t h = maps.front().height();
  const std::size_t w = maps.front().width();
  EnergyMap mean{h, w, std::vector<double>(h * w, 0.0)};
  for (const auto& m : maps) {
    if (m.height() != h || m.width() != w) {
      throw DataError(fmt::format("energy maps must share a grid: {}x{} vs {}x{}", m.height(),
                                  m.width(), h, w));
    }
    const auto e = energy_map(m);
    for (std::size_t i = 0; i < mean.cells.size(); ++i) mean.cells[i] += e.cells[i];
  }
  for (double& v : mean.cells) v /= static_cast<double>(maps.size());
  auto profile = radial_profile(mean);
  return {std::move(mean), std::move(profile)};
}

CenteredCoord energy_centroid(const EnergyMap& energy) {
  double sx = 0.0, sy = 0.0, total = 0.0;
  for (std::size_t r = 0; r < energy.height; ++r) {
    for (std::size_t c = 0; c < energy.width; ++c) {
      const auto p = centered_coords(r, c, energy.height, energy.width);
      const double e = energy.at(r, c);
      sx += e * p.x;
      sy += e * p.y;
      total += e;
    }
  }
  if (total == 0.0) return {};
  return {sx / total, sy / total};
}

Pairing parse_pairing(const std::string& name) {
  if (name == "all") return Pairing::all;
  if (name == "same_class") return Pairing::same_class;
  if (name == "cross_class") return Pairing::cross_class;
  throw std::invalid_argument("unknown pairing: " + name);
}

Weighting parse_weighting(const std::string& name) {
  if (name == "uniform") return Weighting::uniform;
  if (name == "kernel") return Weighting::kernel;
  throw std::invalid_argument("unknown weighting: " + name);
}

std::string to_string(Pairing pairing) {
  switch (pairing) {
    case Pairing::all: return "all";
    case Pairing::same_class: return "same_class";
    case Pairing::cross_class: return "cross_class";
  }
  return "all";
}

std::string to_string(Weighting weighting) {
  return weighting == Weighting::kernel ? "kernel" : "uniform";
}

MatchSet match_locations(std::span<const LabeledMap> queries, const MemoryBank& bank,
                         const ClassifierConfig& config, Pairing pairing, std::size_t workers) {
  std::vector<std::vector<MatchPoint>> per_query(queries.size());
  std::vector<std::size_t> retrieved(queries.size(), 0);
  parallel_for(queries.size(), workers, [&](std::size_t q) {
    const auto& query = queries[q];
    const auto h = query.map.height();
    const auto w = query.map.width();
    for (const auto& pm : retrieve_matches(query, bank, config)) {
      for (const auto& n : pm.neighbors) {
        ++retrieved[q];
        const auto& key = bank.table().key(n.id);
        const bool same = key.class_id == query.class_id;
        if ((pairing == Pairing::same_class && !same) || (pairing == Pairing::cross_class && same)) {
          continue;
        }
        const auto shape = bank.shape_of(key.image_id);
        MatchPoint mp;
        mp.query_image = query.image_id;
        mp.query_class = query.class_id;
        mp.query_row = pm.row;
        mp.query_col = pm.col;
        mp.query = centered_coords(pm.row, pm.col, h, w);
        mp.memory_image = key.image_id;
        mp.memory_class = key.class_id;
        mp.memory_row = key.row;
        mp.memory_col = key.col;
        mp.memory = centered_coords(key.row, key.col, shape.height, shape.width);
        mp.memory_shape = shape;
        mp.same_class = same;
        mp.weight = kernel_similarity(n.distance, pm.alpha, config.epsilon);
        per_query[q].push_back(std::move(mp));
      }
    }
  });
  MatchSet out;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    out.retrieved += retrieved[q];
    std::move(per_query[q].begin(), per_query[q].end(), std::back_inserter(out.points));
  }
  return out;
}

AngularStats circular_stats(std::span<const WeightedPoint> points) {
  AngularStats s;
  double sc = 0.0, ss = 0.0, sw = 0.0;
  for (const auto& p : points) {
    if (p.x == 0.0 && p.y == 0.0) {
      ++s.n_origin;
      continue;
    }
    const double r = std::hypot(p.x, p.y);
    sc += p.w * (p.x / r);
    ss += p.w * (p.y / r);
    sw += p.w;
    ++s.n;
  }
  if (s.n == 0 || sw <= 0.0) return s;
  s.resultant_length = std::min(1.0, std::hypot(sc, ss) / sw);
  s.circular_variance = 1.0 - s.resultant_length;
  s.rayleigh_z = static_cast<double>(s.n) * s.resultant_length * s.resultant_length;
  s.defined = s.resultant_length > kUndefinedResultant;
  if (s.defined) {
    s.mean_angle = std::atan2(ss, sc);
    if (s.mean_angle <= -std::numbers::pi) s.mean_angle = std::numbers::pi;
  }
  return s;
}

AngularStats circular_stats(std::span<const MatchPoint> matches, Weighting weighting) {
  std::vector<WeightedPoint> pts;
  pts.reserve(matches.size());
  for (const auto& m : matches) {
    pts.push_back({m.memory.x, m.memory.y, weighting == Weighting::kernel ? m.weight : 1.0});
  }
  return circular_stats(pts);
}

namespace {

Histogram2D histogram_where(std::span<const MatchPoint> matches, std::size_t height,
                            std::size_t width, auto&& keep) {
  Histogram2D h{height, width, std::vector<std::uint64_t>(height * width, 0),
                std::vector<double>(height * width, 0.0), 0};
  for (const auto& m : matches) {
    if (!keep(m)) continue;
    if (m.memory_shape.height != height || m.memory_shape.width != width) {
      throw DataError(fmt::format("match from a {}x{} memory grid in a {}x{} histogram",
                                  m.memory_shape.height, m.memory_shape.width, height, width));
    }
    ++h.counts[m.memory_row * width + m.memory_col];
    ++h.total;
  }
  if (h.total > 0) {
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      h.probability[i] = static_cast<double>(h.counts[i]) / static_cast<double>(h.total);
    }
  }
  return h;
}

}  // namespace

Histogram2D match_histogram(std::span<const MatchPoint> matches, std::size_t height,
                            std::size_t width) {
  return histogram_where(matches, height, width, [](const MatchPoint&) { return true; });
}

Histogram2D conditional_match_distribution(std::span<const MatchPoint> matches,
                                           std::size_t query_row, std::size_t query_col,
                                           std::size_t height, std::size_t width) {
  return histogram_where(matches, height, width, [&](const MatchPoint& m) {
    return m.query_row == query_row && m.query_col == query_col;
  });
}

double histogram_spread(const Histogram2D& hist) {
  if (hist.empty()) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t r = 0; r < hist.height; ++r) {
    for (std::size_t c = 0; c < hist.width; ++c) {
      const auto p = centered_coords(r, c, hist.height, hist.width);
      mx += hist.probability[r * hist.width + c] * p.x;
      my += hist.probability[r * hist.width + c] * p.y;
    }
  }
  double var = 0.0;
  for (std::size_t r = 0; r < hist.height; ++r) {
    for (std::size_t c = 0; c < hist.width; ++c) {
      const auto p = centered_coords(r, c, hist.height, hist.width);
      var += hist.probability[r * hist.width + c] * ((p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my));
    }
  }
  return var;
}

RadialTangential radial_tangential_variance(std::span<const Displacement> displacements) {
  RadialTangential out;
  double sr = 0.0, st = 0.0, srr = 0.0, stt = 0.0;
  for (const auto& d : displacements) {
    const double norm = std::hypot(d.from.x, d.from.y);
    if (norm == 0.0) {
      ++out.n_origin;
      continue;
    }
    const double ux = d.from.x / norm, uy = d.from.y / norm;
    const double dx = d.to.x - d.from.x, dy = d.to.y - d.from.y;
    const double radial = dx * ux + dy * uy;
    const double tangential = -dx * uy + dy * ux;
    sr += radial;
    st += tangential;
    srr += radial * radial;
    stt += tangential * tangential;
    ++out.n;
  }
  if (out.n == 0) return out;
  const double n = static_cast<double>(out.n);
  out.radial_variance = std::max(0.0, srr / n - (sr / n) * (sr / n));
  out.tangential_variance = std::max(0.0, stt / n - (st / n) * (st / n));
  return out;
}

RadialTangential radial_tangential_variance(std::span<const MatchPoint> matches) {
  std::vector<Displacement> d;
  d.reserve(matches.size());
  for (const auto& m : matches) d.push_back({m.query, m.memory});
  return radial_tangential_variance(d);
}

double confusion_radius(std::span<const MatchPoint> matches, Weighting weighting, double fraction) {
  std::vector<std::pair<double, double>> rw;  // radius, weight
  double total = 0.0;
  for (const auto& m : matches) {
    const double w = weighting == Weighting::kernel ? m.weight : 1.0;
    rw.emplace_back(std::hypot(m.memory.x, m.memory.y), w);
    total += w;
  }
  if (rw.empty() || total <= 0.0) return 0.0;
  std::sort(rw.begin(), rw.end());
  double acc = 0.0;
  for (const auto& [r, w] : rw) {
    acc += w;
    if (acc >= fraction * total) return r;
  }
  return rw.back().first;
}

std::vector<ClassAngularRow> angular_report(std::span<const MatchPoint> matches,
                                            Weighting weighting) {
  std::map<std::int64_t, std::vector<MatchPoint>> by_class;
  for (const auto& m : matches) by_class[m.query_class].push_back(m);
  std::vector<ClassAngularRow> rows;
  for (const auto& [cls, ms] : by_class) {
    rows.push_back({cls, circular_stats(ms, weighting), radial_tangential_variance(ms),
                    confusion_radius(ms, weighting)});
  }
  return rows;
}

std::string angular_report_csv(std::span<const ClassAngularRow> rows) {
  std::ostringstream out;
  out << "class_id,theta_deg,R,n,rayleigh_z,var_radial,var_tangential,n_origin,confusion_radius_68\n";
  for (const auto& row : rows) {
    const auto& s = row.stats;
    const std::string theta =
        s.defined ? fmt::format("{}", s.mean_angle * 180.0 / std::numbers::pi) : std::string();
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", row.class_id, theta, s.resultant_length, s.n,
                       s.rayleigh_z, row.radtan.radial_variance, row.radtan.tangential_variance,
                       s.n_origin, row.confusion_radius);
  }
  return out.str();
}

std::string matches_csv(std::span<const MatchPoint> matches) {
  std::ostringstream out;
  out << "query_image,query_class,query_x,query_y,memory_image,memory_class,memory_x,memory_y,"
         "same_class,weight\n";
  for (const auto& m : matches) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", m.query_image, m.query_class, m.query.x,
                       m.query.y, m.memory_image, m.memory_class, m.memory.x, m.memory.y,
                       m.same_class ? 1 : 0, m.weight);
  }
  return out.str();
}

std::string radial_profile_csv(const RadialProfile& profile) {
  std::ostringstream out;
  out << "radius,count,mean_energy,asymmetry\n";
  for (std::size_t b = 0; b < profile.radius.size(); ++b) {
    out << fmt::format("{},{},{},{}\n", profile.radius[b], profile.counts[b], profile.mean_energy[b],
                       profile.asymmetry[b]);
  }
  return out.str();
}

nlohmann::json to_json(const AngularStats& s) {
  nlohmann::json j{{"n", s.n},
                   {"n_origin", s.n_origin},
                   {"R", s.resultant_length},
                   {"circular_variance", s.circular_variance},
                   {"rayleigh_z", s.rayleigh_z},
                   {"defined", s.defined}};
  j["theta_deg"] = s.defined ? nlohmann::json(s.mean_angle * 180.0 / std::numbers::pi) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const RadialTangential& rt) {
  return {{"var_radial", rt.radial_variance},
          {"var_tangential", rt.tangential_variance},
          {"n", rt.n},
          {"n_origin", rt.n_origin}};
}

}  // namespace u1
