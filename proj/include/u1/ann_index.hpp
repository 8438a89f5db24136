#pragma once

// Random-projection forest for approximate K-nearest-neighbor search over
// pixel vectors, plus the exact full-scan search it is verified against.
//
// Each tree splits a node by the hyperplane through the midpoint of two
// distinct points sampled from it, normal to their difference. Queries walk
// all trees best-first from one shared priority queue ordered by hyperplane
// margin, collect up to `search_budget` distinct candidates and re-rank them
// exactly. Results are ordered by (distance, image_id, row, col).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "u1/activation.hpp"

namespace u1 {

enum class Metric { euclidean, cosine };

std::string to_string(Metric metric);
Metric parse_metric(const std::string& name);

struct IndexConfig {
  std::size_t n_trees = 16;
  std::size_t leaf_size = 16;
  std::uint64_t seed = 42;
  Metric metric = Metric::euclidean;
  std::size_t search_budget = 0;  // 0: n_trees * K at query time

  void validate() const;
  std::size_t budget_for(std::size_t k) const {
    return search_budget == 0 ? n_trees * k : search_budget;
  }
  friend bool operator==(const IndexConfig&, const IndexConfig&) = default;
};

struct VectorKey {
  std::string image_id;
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::int64_t class_id = 0;

  friend bool operator==(const VectorKey&, const VectorKey&) = default;
};

/// Tie order: (image_id, row, col).
inline std::strong_ordering compare_keys(const VectorKey& a, const VectorKey& b) {
  if (auto c = a.image_id <=> b.image_id; c != 0) return c;
  if (auto c = a.row <=> b.row; c != 0) return c;
  return a.col <=> b.col;
}

struct Neighbor {
  std::size_t id = 0;
  double distance = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Flat row-major table of equal-length vectors and their keys.
class VectorTable {
 public:
  VectorTable() = default;
  explicit VectorTable(std::size_t dim) : dim_(dim) {}

  /// Throws DataError on dimension mismatch.
  void add(std::span<const double> v, VectorKey key);
  void add(const PixelVector& pv);

  std::size_t size() const noexcept { return keys_.size(); }
  bool empty() const noexcept { return keys_.empty(); }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> vector(std::size_t id) const {
    return std::span<const double>(data_).subspan(id * dim_, dim_);
  }
  const VectorKey& key(std::size_t id) const { return keys_[id]; }
  const std::vector<VectorKey>& keys() const noexcept { return keys_; }
  std::span<const double> data() const noexcept { return data_; }
  double norm(std::size_t id) const { return norms_[id]; }

  std::uint32_t image_index(std::size_t id) const { return image_of_[id]; }
  std::optional<std::uint32_t> find_image(std::string_view image_id) const;
  std::size_t image_count() const noexcept { return images_.size(); }

  friend bool operator==(const VectorTable& a, const VectorTable& b) {
    return a.dim_ == b.dim_ && a.data_ == b.data_ && a.keys_ == b.keys_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
  std::vector<double> norms_;
  std::vector<VectorKey> keys_;
  std::vector<std::uint32_t> image_of_;
  std::vector<std::string> images_;
  std::unordered_map<std::string, std::uint32_t> image_lookup_;
};

/// Distance under `metric`. Cosine distance is 1 - cos(a, b); a zero vector
/// is at cosine distance 1 from everything.
double metric_distance(Metric metric, std::span<const double> a, double norm_a,
                       std::span<const double> b, double norm_b);

/// Exact K-NN by full scan, same tie rule as the forest.
std::vector<Neighbor> brute_force_knn(const VectorTable& table, Metric metric,
                                      std::span<const double> q, std::size_t k,
                                      std::optional<std::string_view> exclude_image = {});

class RPForest {
 public:
  struct Node {
    bool leaf = false;
    std::uint32_t left = 0;     // child node index (internal)
    std::uint32_t right = 0;
    std::uint32_t begin = 0;    // plane offset (internal) or first leaf id slot (leaf)
    std::uint32_t count = 0;    // leaf size
    double offset = 0.0;
    friend bool operator==(const Node&, const Node&) = default;
  };

  struct Tree {
    std::vector<Node> nodes;        // pre-order, root at 0
    std::vector<double> planes;     // unit normals, dim per internal node
    std::vector<std::uint32_t> ids; // leaf contents
    friend bool operator==(const Tree&, const Tree&) = default;
  };

  /// Deterministic given (table order, config). Trees are independent and
  /// may be built on `workers` threads without changing the result.
  static RPForest build(VectorTable table, const IndexConfig& config, std::size_t workers = 1);

  /// Up to k neighbors in ascending (distance, key) order, never from
  /// `exclude_image`. `budget` overrides the configured search budget.
  std::vector<Neighbor> query_knn(std::span<const double> q, std::size_t k,
                                  std::optional<std::string_view> exclude_image = {},
                                  std::optional<std::size_t> budget = {}) const;

  /// Full-scan search over the same table (exact oracle).
  std::vector<Neighbor> exact_knn(std::span<const double> q, std::size_t k,
                                  std::optional<std::string_view> exclude_image = {}) const {
    return brute_force_knn(table_, config_.metric, q, k, exclude_image);
  }

  const VectorTable& table() const noexcept { return table_; }
  const IndexConfig& config() const noexcept { return config_; }
  const std::vector<Tree>& trees() const noexcept { return trees_; }
  std::size_t depth(std::size_t tree) const;

  void save(const std::filesystem::path& path) const;
  static RPForest load(const std::filesystem::path& path);
  std::vector<std::byte> serialize() const;
  static RPForest deserialize(std::span<const std::byte> bytes);

  friend bool operator==(const RPForest& a, const RPForest& b) {
    return a.config_ == b.config_ && a.table_ == b.table_ && a.trees_ == b.trees_;
  }

 private:
  RPForest(VectorTable table, IndexConfig config) : table_(std::move(table)), config_(config) {}
  Tree build_tree(std::uint64_t seed) const;

  VectorTable table_;
  IndexConfig config_;
  std::vector<Tree> trees_;
};

/// Sorts by (distance, key) and truncates to k.
void rank_neighbors(const VectorTable& table, std::vector<Neighbor>& candidates, std::size_t k);

}  // namespace u1
