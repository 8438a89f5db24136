#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "u1/errors.hpp"
#include "u1/labels.hpp"
#include "u1/symmetry.hpp"

namespace u1 {
namespace {

constexpr double kPi = std::numbers::pi;

EnergyMap radial_energy(std::size_t side, auto&& f) {
  EnergyMap e{side, side, std::vector<double>(side * side)};
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const auto p = centered_coords(r, c, side, side);
      e.cells[r * side + c] = f(p.x, p.y);
    }
  }
  return e;
}

double wrap(double a) { return std::remainder(a, 2.0 * kPi); }

TEST(RadialProfileTest, SymmetricEnergyHasNoAsymmetry) {
  for (std::size_t side : {5u, 7u, 8u}) {
    const auto e = radial_energy(side, [](double x, double y) {
      const double r = std::hypot(x, y);
      return r * r * std::exp(-r);  // ring-shaped maximum
    });
    const auto profile = radial_profile(e);
    std::size_t total = 0;
    for (std::size_t b = 0; b < profile.radius.size(); ++b) {
      EXPECT_LT(profile.asymmetry[b], 1e-6) << side << " bin " << b;
      total += profile.counts[b];
      if (b > 0) {
        EXPECT_GT(profile.radius[b], profile.radius[b - 1]);
      }
    }
    EXPECT_EQ(total, side * side);
  }
}

TEST(RadialProfileTest, CenterSpike) {
  auto e = radial_energy(7, [](double, double) { return 0.0; });
  e.cells[3 * 7 + 3] = 5.0;
  const auto profile = radial_profile(e);
  EXPECT_DOUBLE_EQ(profile.radius[0], 0.0);
  EXPECT_DOUBLE_EQ(profile.mean_energy[0], 5.0);
  for (std::size_t b = 1; b < profile.radius.size(); ++b) EXPECT_DOUBLE_EQ(profile.mean_energy[b], 0.0);
}

TEST(RadialProfileTest, LobeIsAsymmetric) {
  const auto e = radial_energy(7, [](double x, double y) {
    return std::exp(-((x - 2) * (x - 2) + y * y));
  });
  const auto profile = radial_profile(e);
  EXPECT_GT(*std::max_element(profile.asymmetry.begin(), profile.asymmetry.end()), 0.5);
}

TEST(Energy, CentroidOfOffsetBlob) {
  const auto e = radial_energy(11, [](double x, double y) {
    return std::exp(-((x - 2) * (x - 2) + y * y) / (2 * 0.8 * 0.8));
  });
  const auto c = energy_centroid(e);
  EXPECT_NEAR(c.x, 2.0, 0.1);
  EXPECT_NEAR(c.y, 0.0, 0.1);
}

TEST(Energy, AggregateOfIdenticalMaps) {
  std::mt19937_64 rng(1);
  const auto map = test::random_map(4, 5, 3, rng);
  const std::vector<ActivationMap> maps(4, map);
  const auto summary = aggregate_energy(maps);
  const auto single = energy_map(map);
  for (std::size_t i = 0; i < single.cells.size(); ++i) {
    EXPECT_NEAR(summary.mean.cells[i], single.cells[i], 1e-12);
  }
  EXPECT_THROW(aggregate_energy(std::vector<ActivationMap>{}), std::invalid_argument);
  const std::vector<ActivationMap> mixed{map, test::random_map(5, 4, 3, rng)};
  EXPECT_THROW(aggregate_energy(mixed), DataError);
}

TEST(Circular, ExactCases) {
  const std::vector<WeightedPoint> right_angle{{1, 0, 1}, {0, 1, 1}};
  const auto s = circular_stats(right_angle);
  EXPECT_TRUE(s.defined);
  EXPECT_NEAR(s.mean_angle, kPi / 4, 1e-12);
  EXPECT_NEAR(s.resultant_length, std::sqrt(0.5), 1e-6);
  EXPECT_NEAR(s.rayleigh_z, 2 * 0.5, 1e-12);
  EXPECT_NEAR(s.circular_variance, 1 - std::sqrt(0.5), 1e-12);

  const std::vector<WeightedPoint> aligned{{1, 1, 1}, {2, 2, 1}, {0.1, 0.1, 1}};
  EXPECT_NEAR(circular_stats(aligned).resultant_length, 1.0, 1e-12);

  const std::vector<WeightedPoint> cardinal{{1, 0, 1}, {0, 1, 1}, {-1, 0, 1}, {0, -1, 1}};
  const auto c = circular_stats(cardinal);
  EXPECT_LT(c.resultant_length, 1e-12);
  EXPECT_FALSE(c.defined);

  const std::vector<WeightedPoint> origin{{0, 0, 1}, {0, 0, 1}};
  const auto o = circular_stats(origin);
  EXPECT_FALSE(o.defined);
  EXPECT_EQ(o.n, 0u);
  EXPECT_EQ(o.n_origin, 2u);

  const std::vector<WeightedPoint> west{{-1, 0, 1}};
  EXPECT_DOUBLE_EQ(circular_stats(west).mean_angle, kPi);
}

TEST(Circular, Weighted) {
  const std::vector<WeightedPoint> pts{{1, 0, 3}, {0, 1, 1}};
  const auto s = circular_stats(pts);
  EXPECT_NEAR(s.mean_angle, std::atan2(1.0, 3.0), 1e-12);
  EXPECT_NEAR(s.resultant_length, std::hypot(3.0, 1.0) / 4.0, 1e-12);
}

TEST(Circular, ScaleAndRotationInvariance) {
  std::mt19937_64 rng(2);
  std::vector<WeightedPoint> pts;
  for (int i = 0; i < 200; ++i) {
    const double a = 0.6 * standard_normal(rng) + 1.0;
    const double r = 0.5 + 3 * unit_uniform(rng);
    pts.push_back({r * std::cos(a), r * std::sin(a), 0.1 + unit_uniform(rng)});
  }
  const auto base = circular_stats(pts);
  for (double s : {0.01, 0.5, 7.0}) {
    auto scaled = pts;
    for (auto& p : scaled) p.x *= s, p.y *= s;
    const auto t = circular_stats(scaled);
    EXPECT_NEAR(t.mean_angle, base.mean_angle, 1e-9);
    EXPECT_NEAR(t.resultant_length, base.resultant_length, 1e-9);
  }
  for (double phi : {0.3, -2.0, 3.0}) {
    auto rotated = pts;
    for (auto& p : rotated) {
      const double x = p.x * std::cos(phi) - p.y * std::sin(phi);
      const double y = p.x * std::sin(phi) + p.y * std::cos(phi);
      p.x = x, p.y = y;
    }
    const auto t = circular_stats(rotated);
    EXPECT_NEAR(wrap(t.mean_angle - base.mean_angle - phi), 0.0, 1e-9);
    EXPECT_NEAR(t.resultant_length, base.resultant_length, 1e-9);
  }
}

TEST(RadialTangentialTest, PureDirections) {
  std::mt19937_64 rng(3);
  std::vector<Displacement> radial, tangential;
  for (int i = 0; i < 100; ++i) {
    const double a = 2 * kPi * unit_uniform(rng), r = 0.5 + 2 * unit_uniform(rng);
    const double step = standard_normal(rng);
    const CenteredCoord from{r * std::cos(a), r * std::sin(a)};
    radial.push_back({from, {from.x + step * std::cos(a), from.y + step * std::sin(a)}});
    tangential.push_back({from, {from.x - step * std::sin(a), from.y + step * std::cos(a)}});
  }
  const auto rr = radial_tangential_variance(radial);
  EXPECT_NEAR(rr.tangential_variance, 0.0, 1e-12);
  EXPECT_GT(rr.radial_variance, 0.1);
  const auto tt = radial_tangential_variance(tangential);
  EXPECT_NEAR(tt.radial_variance, 0.0, 1e-12);
  EXPECT_GT(tt.tangential_variance, 0.1);
}

TEST(RadialTangentialTest, IsotropicRatioAndOrigin) {
  std::mt19937_64 rng(4);
  std::vector<Displacement> d;
  for (int i = 0; i < 10000; ++i) {
    const CenteredCoord from{6 * unit_uniform(rng) - 3, 6 * unit_uniform(rng) - 3};
    d.push_back({from, {from.x + standard_normal(rng), from.y + standard_normal(rng)}});
  }
  d.push_back({{0, 0}, {1, 1}});
  const auto rt = radial_tangential_variance(d);
  EXPECT_EQ(rt.n, 10000u);
  EXPECT_EQ(rt.n_origin, 1u);
  EXPECT_NEAR(rt.tangential_variance / rt.radial_variance, 1.0, 0.1);
}

class MatchTest : public ::testing::Test {
 protected:
  static std::vector<LabeledMap> copy_memory(const LabeledMap& q, std::mt19937_64& rng) {
    std::vector<LabeledMap> mem{{"copy", q.class_id, q.map}};
    for (int i = 0; i < 5; ++i) mem.push_back({"r" + std::to_string(i), 9, test::random_map(5, 5, 16, rng, true)});
    return mem;
  }
};

TEST_F(MatchTest, ExactCopyMatchesInPlace) {
  std::mt19937_64 rng(5);
  const LabeledMap q{"q", 1, test::random_map(5, 5, 16, rng, true)};
  const auto bank = MemoryBank::build(copy_memory(q, rng), true, IndexConfig{});
  ClassifierConfig c;
  c.k = 1;
  const auto matches = match_locations(std::vector<LabeledMap>{q}, bank, c, Pairing::all);
  ASSERT_EQ(matches.points.size(), 25u);
  for (const auto& m : matches.points) {
    EXPECT_EQ(m.memory, m.query);
    EXPECT_TRUE(m.same_class);
    EXPECT_DOUBLE_EQ(m.weight, 1.0);
  }
  const auto hist = conditional_match_distribution(matches.points, 1, 3, 5, 5);
  EXPECT_EQ(hist.total, 1u);
  EXPECT_DOUBLE_EQ(hist.probability[1 * 5 + 3], 1.0);
  EXPECT_DOUBLE_EQ(histogram_spread(hist), 0.0);
  const auto rt = radial_tangential_variance(matches.points);
  EXPECT_DOUBLE_EQ(rt.radial_variance, 0.0);
  EXPECT_EQ(rt.n_origin, 1u);
}

TEST_F(MatchTest, PairingFilter) {
  std::mt19937_64 rng(6);
  const LabeledMap q{"q", 1, test::random_map(5, 5, 16, rng, true)};
  const auto bank = MemoryBank::build(copy_memory(q, rng), true, IndexConfig{});
  ClassifierConfig c;
  c.k = 3;
  const std::vector<LabeledMap> qs{q};
  const auto all = match_locations(qs, bank, c, Pairing::all);
  const auto same = match_locations(qs, bank, c, Pairing::same_class);
  const auto cross = match_locations(qs, bank, c, Pairing::cross_class);
  EXPECT_EQ(all.retrieved, 75u);
  EXPECT_EQ(same.points.size() + cross.points.size(), all.points.size());
  for (const auto& m : cross.points) EXPECT_FALSE(m.same_class);
  for (const auto& m : same.points) EXPECT_TRUE(m.same_class);
  EXPECT_EQ(parse_pairing("cross_class"), Pairing::cross_class);
  EXPECT_THROW(parse_pairing("other"), std::invalid_argument);
}

TEST_F(MatchTest, ConditionalHistogramsSumToUnconditional) {
  test::LobeParams p;
  p.per_class = 6;
  const auto ds = test::make_lobe_dataset(p);
  const auto bank = MemoryBank::build(ds.maps, true, IndexConfig{});
  const auto matches = match_locations(ds.maps, bank, ClassifierConfig{}, Pairing::all, 2);
  const auto full = match_histogram(matches.points, 7, 7);
  std::vector<std::uint64_t> sum(49, 0);
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t c = 0; c < 7; ++c) {
      const auto h = conditional_match_distribution(matches.points, r, c, 7, 7);
      if (h.empty()) continue;
      double mass = 0.0;
      for (std::size_t i = 0; i < 49; ++i) {
        sum[i] += h.counts[i];
        mass += h.probability[i];
      }
      EXPECT_NEAR(mass, 1.0, 1e-9);
    }
  }
  EXPECT_EQ(sum, full.counts);
  EXPECT_THROW(match_histogram(matches.points, 5, 5), DataError);
}

TEST_F(MatchTest, RandomMemorySpreadsWiderThanNearCopy) {
  std::mt19937_64 rng(7);
  std::vector<LabeledMap> queries, near_copies, noise;
  for (int i = 0; i < 20; ++i) {
    const auto q = test::random_map(5, 5, 16, rng);
    std::vector<float> jittered(q.values().begin(), q.values().end());
    for (auto& v : jittered) v += 0.01f * static_cast<float>(standard_normal(rng));
    queries.push_back({"q" + std::to_string(i), 0, q});
    near_copies.push_back({"c" + std::to_string(i), 0, ActivationMap(5, 5, 16, jittered)});
    noise.push_back({"n" + std::to_string(i), 0, test::random_map(5, 5, 16, rng)});
  }
  ClassifierConfig c;
  c.k = 1;
  c.exact = true;
  const auto copy_bank = MemoryBank::build(near_copies, true, IndexConfig{});
  const auto noise_bank = MemoryBank::build(noise, true, IndexConfig{});
  const auto near = match_locations(queries, copy_bank, c, Pairing::all);
  const auto random = match_locations(queries, noise_bank, c, Pairing::all);
  const double s_near = histogram_spread(conditional_match_distribution(near.points, 2, 2, 5, 5));
  const double s_rand = histogram_spread(conditional_match_distribution(random.points, 2, 2, 5, 5));
  EXPECT_LT(s_near, 1e-12);
  EXPECT_GT(s_rand, 1.0);
}

TEST(ConfusionRadius, Quantile) {
  std::vector<MatchPoint> pts(10);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i].memory = {static_cast<double>(i + 1), 0};
  EXPECT_DOUBLE_EQ(confusion_radius(pts, Weighting::uniform), 7.0);
  EXPECT_DOUBLE_EQ(confusion_radius(pts, Weighting::uniform, 1.0), 10.0);
  EXPECT_DOUBLE_EQ(confusion_radius(std::vector<MatchPoint>{}, Weighting::uniform), 0.0);
}

TEST(Reports, AngularCsv) {
  std::vector<MatchPoint> pts(2);
  pts[0].query_class = 3;
  pts[0].memory = {1, 0};
  pts[1].query_class = 3;
  pts[1].memory = {0, 1};
  const auto rows = angular_report(pts, Weighting::uniform);
  ASSERT_EQ(rows.size(), 1u);
  const auto csv = angular_report_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "class_id,theta_deg,R,n,rayleigh_z,var_radial,var_tangential,n_origin,confusion_radius_68");
  const auto row = csv.substr(csv.find('\n') + 1);
  EXPECT_EQ(row.substr(0, 4), "3,45");
  EXPECT_NE(row.find(",0.7071"), std::string::npos);
}

}  // namespace
}  // namespace u1
