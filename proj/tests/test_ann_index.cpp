#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "u1/activation.hpp"
#include "u1/ann_index.hpp"
#include "u1/errors.hpp"

namespace u1 {
namespace {

VectorTable random_table(std::size_t n, std::size_t dim, std::uint64_t seed, bool normalize = false,
                         std::size_t images = 0) {
  std::mt19937_64 rng(seed);
  VectorTable table(dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto v = test::random_vector(dim, rng);
    if (normalize) normalize_in_place(v);
    const std::size_t img = images ? i % images : i;
    table.add(v, {fmt::format("img{:05}", img), static_cast<std::uint32_t>(i / (images ? images : n + 1)),
                  0, static_cast<std::int64_t>(i % 3)});
  }
  return table;
}

std::vector<std::size_t> ids(const std::vector<Neighbor>& ns) {
  std::vector<std::size_t> out;
  for (const auto& n : ns) out.push_back(n.id);
  return out;
}

// Independent full scan: sort every id by (distance, key).
std::vector<std::size_t> oracle_knn(const VectorTable& t, std::span<const double> q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < t.dim(); ++j) d += (q[j] - t.vector(i)[j]) * (q[j] - t.vector(i)[j]);
    all.emplace_back(std::sqrt(d), i);
  }
  std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return compare_keys(t.key(a.second), t.key(b.second)) < 0;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

TEST(IndexConfigTest, Validation) {
  IndexConfig c;
  EXPECT_NO_THROW(c.validate());
  c.leaf_size = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.n_trees = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(IndexConfig{}.budget_for(10), 160u);
  EXPECT_EQ(parse_metric("cosine"), Metric::cosine);
  EXPECT_THROW(parse_metric("manhattan"), std::invalid_argument);
}

TEST(BruteForce, MatchesIndependentScan) {
  const auto table = random_table(300, 12, 1);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto q = test::random_vector(12, rng);
    EXPECT_EQ(ids(brute_force_knn(table, Metric::euclidean, q, 7)), oracle_knn(table, q, 7));
  }
  const auto q = test::random_vector(12, rng);
  EXPECT_EQ(brute_force_knn(table, Metric::euclidean, q, 1000).size(), 300u);
  EXPECT_DOUBLE_EQ(brute_force_knn(table, Metric::euclidean, table.vector(17), 1)[0].distance, 0.0);
  EXPECT_THROW(brute_force_knn(table, Metric::euclidean, std::vector<double>(5), 3), DataError);
}

TEST(Forest, SingleVector) {
  VectorTable t(3);
  t.add(std::vector<double>{1, 2, 3}, {"only", 0, 0, 0});
  const auto forest = RPForest::build(std::move(t), IndexConfig{});
  std::mt19937_64 rng(4);
  for (int i = 0; i < 5; ++i) {
    const auto res = forest.query_knn(test::random_vector(3, rng), 1);
    ASSERT_EQ(res.size(), 1u);
    EXPECT_EQ(res[0].id, 0u);
  }
}

TEST(Forest, OrthonormalBasis) {
  VectorTable t(3);
  t.add(std::vector<double>{1, 0, 0}, {"e1", 0, 0, 0});
  t.add(std::vector<double>{0, 1, 0}, {"e2", 0, 0, 1});
  t.add(std::vector<double>{0, 0, 1}, {"e3", 0, 0, 2});
  const auto forest = RPForest::build(std::move(t), IndexConfig{});
  const auto res = forest.query_knn(std::vector<double>{1, 0, 0}, 1);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(forest.table().key(res[0].id).image_id, "e1");
  EXPECT_DOUBLE_EQ(res[0].distance, 0.0);
}

TEST(Forest, TiesBreakByKey) {
  VectorTable t(2);
  t.add(std::vector<double>{0, 1}, {"b", 0, 0, 0});
  t.add(std::vector<double>{0, -1}, {"a", 2, 0, 0});
  t.add(std::vector<double>{1, 0}, {"a", 1, 5, 0});
  t.add(std::vector<double>{-1, 0}, {"a", 1, 4, 0});
  const auto forest = RPForest::build(std::move(t), IndexConfig{});
  const auto res = forest.query_knn(std::vector<double>{0, 0}, 4, {}, 4);
  std::vector<std::string> order;
  for (const auto& n : res) {
    const auto& k = forest.table().key(n.id);
    order.push_back(fmt::format("{}:{}:{}", k.image_id, k.row, k.col));
  }
  EXPECT_EQ(order, (std::vector<std::string>{"a:1:4", "a:1:5", "a:2:0", "b:0:0"}));
}

TEST(Forest, ExactAtFullBudget) {
  const std::size_t n = 500;
  const auto forest = RPForest::build(random_table(n, 32, 5), IndexConfig{16, 16, 7});
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto q = test::random_vector(32, rng);
    EXPECT_EQ(forest.query_knn(q, 10, {}, n), forest.exact_knn(q, 10));
  }
}

TEST(Forest, ExclusionHonored) {
  const auto forest = RPForest::build(random_table(400, 8, 8, false, 20), IndexConfig{8, 4, 1});
  for (std::size_t i = 0; i < 40; ++i) {
    const auto& key = forest.table().key(i);
    const auto approx = forest.query_knn(forest.table().vector(i), 10, key.image_id);
    const auto exact = forest.exact_knn(forest.table().vector(i), 10, key.image_id);
    EXPECT_EQ(forest.query_knn(forest.table().vector(i), 10, key.image_id, 400), exact);
    for (const auto& nb : approx) EXPECT_NE(forest.table().key(nb.id).image_id, key.image_id);
    EXPECT_EQ(approx.size(), 10u);
    EXPECT_TRUE(std::is_sorted(approx.begin(), approx.end(),
                               [](const auto& a, const auto& b) { return a.distance < b.distance; }));
  }
}

TEST(Forest, LeavesPartitionVectors) {
  const std::size_t n = 1000, leaf = 8;
  const auto forest = RPForest::build(random_table(n, 16, 9), IndexConfig{6, leaf, 3});
  const double bound = std::ceil(std::log2(static_cast<double>(n) / leaf));
  for (std::size_t t = 0; t < forest.trees().size(); ++t) {
    const auto& tree = forest.trees()[t];
    std::vector<int> seen(n, 0);
    for (const auto& node : tree.nodes) {
      if (!node.leaf) continue;
      EXPECT_LE(node.count, leaf);
      for (std::uint32_t s = node.begin; s < node.begin + node.count; ++s) ++seen[tree.ids[s]];
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    EXPECT_LE(static_cast<double>(forest.depth(t)), 2.0 * bound + 4.0);
  }
}

TEST(Forest, DegenerateIdenticalPoints) {
  VectorTable t(4);
  for (std::uint32_t i = 0; i < 50; ++i) t.add(std::vector<double>{1, 1, 1, 1}, {"dup", i, 0, 0});
  const auto forest = RPForest::build(std::move(t), IndexConfig{4, 4, 1});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(forest.depth(i), 0u);
  const auto res = forest.query_knn(std::vector<double>{1, 1, 1, 1}, 3);
  ASSERT_EQ(res.size(), 3u);
  EXPECT_EQ(ids(res), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Forest, Deterministic) {
  const IndexConfig config{8, 8, 99};
  const auto a = RPForest::build(random_table(600, 10, 11), config, 1);
  const auto b = RPForest::build(random_table(600, 10, 11), config, 4);
  EXPECT_TRUE(a == b);
  const auto c = RPForest::build(random_table(600, 10, 11), IndexConfig{8, 8, 100});
  EXPECT_FALSE(a.trees() == c.trees());
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const auto q = test::random_vector(10, rng);
    EXPECT_EQ(a.query_knn(q, 5), b.query_knn(q, 5));
  }
}

TEST(Forest, PersistenceRoundTrip) {
  for (Metric m : {Metric::euclidean, Metric::cosine}) {
    IndexConfig config{5, 6, 13, m, 40};
    const auto forest = RPForest::build(random_table(300, 9, 14), config);
    test::TempDir dir;
    forest.save(dir / "f.u1ix");
    const auto loaded = RPForest::load(dir / "f.u1ix");
    EXPECT_TRUE(loaded == forest);
    std::mt19937_64 rng(15);
    for (int t = 0; t < 20; ++t) {
      const auto q = test::random_vector(9, rng);
      EXPECT_EQ(loaded.query_knn(q, 4), forest.query_knn(q, 4));
    }
  }
}

TEST(Forest, CorruptFilesRejected) {
  const auto bytes = RPForest::build(random_table(50, 4, 16), IndexConfig{2, 4, 1}).serialize();
  auto bad = bytes;
  bad[0] = std::byte{'X'};
  EXPECT_THROW(RPForest::deserialize(bad), DataError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(RPForest::deserialize(std::span(bytes).first(cut)), DataError) << cut;
  }
  auto trailing = bytes;
  trailing.push_back(std::byte{0});
  EXPECT_THROW(RPForest::deserialize(trailing), DataError);
  EXPECT_THROW(RPForest::load("/nonexistent/f.u1ix"), DataError);
}

TEST(Forest, Errors) {
  EXPECT_THROW(RPForest::build(VectorTable(3), IndexConfig{}), DataError);
  VectorTable t(3);
  EXPECT_THROW(t.add(std::vector<double>{1, 2}, {"a", 0, 0, 0}), DataError);
  t.add(std::vector<double>{1, 2, 3}, {"a", 0, 0, 0});
  const auto forest = RPForest::build(std::move(t), IndexConfig{});
  EXPECT_THROW(forest.query_knn(std::vector<double>{1, 2}, 1), DataError);
  EXPECT_THROW(forest.query_knn(std::vector<double>{1, 2, 3}, 5, {}, 4), std::invalid_argument);
  EXPECT_THROW(forest.query_knn(std::vector<double>{1, 2, 3}, 0), std::invalid_argument);
}

TEST(Forest, MetricEquivalenceOnUnitVectors) {
  const auto table = random_table(400, 16, 17, true);
  const auto euc = RPForest::build(table, IndexConfig{8, 8, 3, Metric::euclidean});
  const auto cos = RPForest::build(table, IndexConfig{8, 8, 3, Metric::cosine});
  std::mt19937_64 rng(18);
  for (int t = 0; t < 30; ++t) {
    auto q = test::random_vector(16, rng);
    normalize_in_place(q);
    EXPECT_EQ(ids(euc.query_knn(q, 10, {}, 400)), ids(cos.query_knn(q, 10, {}, 400)));
    EXPECT_EQ(ids(euc.exact_knn(q, 10)), ids(cos.exact_knn(q, 10)));
  }
}

TEST(Metric, CosineDistance) {
  const std::vector<double> a{1, 0}, b{0, 2}, z{0, 0};
  EXPECT_DOUBLE_EQ(metric_distance(Metric::cosine, a, 1, b, 2), 1.0);
  EXPECT_DOUBLE_EQ(metric_distance(Metric::cosine, a, 1, a, 1), 0.0);
  EXPECT_DOUBLE_EQ(metric_distance(Metric::cosine, a, 1, z, 0), 1.0);
  EXPECT_DOUBLE_EQ(metric_distance(Metric::euclidean, a, 1, b, 2), std::sqrt(5.0));
}

}  // namespace
}  // namespace u1
