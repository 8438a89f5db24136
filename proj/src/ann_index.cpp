#include "u1/ann_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <queue>
#include <random>
#include <tuple>

#include <fmt/format.h>

#include "u1/errors.hpp"
#include "u1/parallel.hpp"
#include "u1/simd/kernels.hpp"

namespace u1 {

std::string to_string(Metric metric) {
  return metric == Metric::cosine ? "cosine" : "euclidean";
}

Metric parse_metric(const std::string& name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "cosine") return Metric::cosine;
  throw std::invalid_argument("unknown metric: " + name);
}

void IndexConfig::validate() const {
  if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
  if (leaf_size < 2) throw std::invalid_argument("leaf_size must be >= 2");
}

void VectorTable::add(std::span<const double> v, VectorKey key) {
  if (keys_.empty() && dim_ == 0) dim_ = v.size();
  if (v.size() != dim_ || dim_ == 0) {
    throw DataError(fmt::format("vector of length {} added to a table of dimension {}", v.size(), dim_));
  }
  data_.insert(data_.end(), v.begin(), v.end());
  norms_.push_back(std::sqrt(simd::dot(v, v)));
  auto [it, inserted] = image_lookup_.emplace(key.image_id, static_cast<std::uint32_t>(images_.size()));
  if (inserted) images_.push_back(key.image_id);
  image_of_.push_back(it->second);
  keys_.push_back(std::move(key));
}

void VectorTable::add(const PixelVector& pv) {
  add(pv.v, VectorKey{pv.image_id, static_cast<std::uint32_t>(pv.row),
                      static_cast<std::uint32_t>(pv.col), pv.class_id});
}

std::optional<std::uint32_t> VectorTable::find_image(std::string_view image_id) const {
  auto it = image_lookup_.find(std::string(image_id));
  if (it == image_lookup_.end()) return std::nullopt;
  return it->second;
}

double metric_distance(Metric metric, std::span<const double> a, double norm_a,
                       std::span<const double> b, double norm_b) {
  if (metric == Metric::euclidean) return std::sqrt(simd::squared_l2(a, b));
  if (norm_a == 0.0 || norm_b == 0.0) return 1.0;
  return 1.0 - simd::dot(a, b) / (norm_a * norm_b);
}

void rank_neighbors(const VectorTable& table, std::vector<Neighbor>& candidates, std::size_t k) {
  auto less = [&](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return compare_keys(table.key(a.id), table.key(b.id)) < 0;
  };
  if (candidates.size() > k) {
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), less);
    candidates.resize(k);
  } else {
    std::sort(candidates.begin(), candidates.end(), less);
  }
}

namespace {

void check_query(const VectorTable& table, std::span<const double> q, std::size_t k) {
  if (q.size() != table.dim()) {
    throw DataError(fmt::format("query of length {} against vectors of dimension {}", q.size(), table.dim()));
  }
  if (k < 1) throw std::invalid_argument("K must be >= 1");
}

std::optional<std::uint32_t> excluded_index(const VectorTable& table,
                                            std::optional<std::string_view> exclude_image) {
  if (!exclude_image) return std::nullopt;
  return table.find_image(*exclude_image);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::size_t kMaxDepth = 256;

}  // namespace

std::vector<Neighbor> brute_force_knn(const VectorTable& table, Metric metric,
                                      std::span<const double> q, std::size_t k,
                                      std::optional<std::string_view> exclude_image) {
  check_query(table, q, k);
  const auto excluded = excluded_index(table, exclude_image);
  const double qnorm = std::sqrt(simd::dot(q, q));
  std::vector<Neighbor> all;
  all.reserve(table.size());
  if (metric == Metric::euclidean) {
    std::vector<double> sq(table.size());
    simd::active_kernels().squared_l2_rows(q.data(), table.data().data(), table.size(), table.dim(),
                                           sq.data());
    for (std::size_t id = 0; id < table.size(); ++id) {
      if (excluded && table.image_index(id) == *excluded) continue;
      all.push_back({id, std::sqrt(sq[id])});
    }
  } else {
    for (std::size_t id = 0; id < table.size(); ++id) {
      if (excluded && table.image_index(id) == *excluded) continue;
      all.push_back({id, metric_distance(metric, q, qnorm, table.vector(id), table.norm(id))});
    }
  }
  rank_neighbors(table, all, k);
  return all;
}

namespace {

// Split geometry is computed on unit vectors for the cosine metric.
struct SplitPoints {
  std::size_t dim;
  std::span<const double> data;
  std::span<const double> at(std::size_t id) const { return data.subspan(id * dim, dim); }
};

struct TreeBuilder {
  SplitPoints points;
  std::size_t leaf_size;
  std::mt19937_64 rng;
  RPForest::Tree tree;
  std::vector<std::uint32_t> ids;
  std::vector<double> margins;

  std::uint32_t make_leaf(std::size_t lo, std::size_t hi) {
    RPForest::Node node;
    node.leaf = true;
    node.begin = static_cast<std::uint32_t>(tree.ids.size());
    node.count = static_cast<std::uint32_t>(hi - lo);
    tree.ids.insert(tree.ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(lo),
                    ids.begin() + static_cast<std::ptrdiff_t>(hi));
    tree.nodes.push_back(node);
    return static_cast<std::uint32_t>(tree.nodes.size() - 1);
  }

  std::optional<std::size_t> distinct_partner(std::size_t lo, std::size_t hi, std::size_t first) {
    const std::size_t n = hi - lo;
    const auto a = points.at(ids[first]);
    for (int attempt = 0; attempt < 3; ++attempt) {
      std::size_t j = lo + rng() % (n - 1);
      if (j >= first) ++j;
      if (!std::equal(a.begin(), a.end(), points.at(ids[j]).begin())) return j;
    }
    for (std::size_t j = lo; j < hi; ++j) {
      if (!std::equal(a.begin(), a.end(), points.at(ids[j]).begin())) return j;
    }
    return std::nullopt;
  }

  std::uint32_t build(std::size_t lo, std::size_t hi, std::size_t depth) {
    const std::size_t n = hi - lo;
    if (n <= leaf_size || depth >= kMaxDepth) return make_leaf(lo, hi);

    const std::size_t first = lo + rng() % n;
    const auto second = distinct_partner(lo, hi, first);
    if (!second) return make_leaf(lo, hi);  // all points identical

    const auto a = points.at(ids[first]);
    const auto b = points.at(ids[*second]);
    std::vector<double> normal(points.dim);
    double norm2 = 0.0;
    for (std::size_t d = 0; d < points.dim; ++d) {
      normal[d] = a[d] - b[d];
      norm2 += normal[d] * normal[d];
    }
    const double inv = 1.0 / std::sqrt(norm2);
    double offset = 0.0;
    for (std::size_t d = 0; d < points.dim; ++d) {
      normal[d] *= inv;
      offset += normal[d] * 0.5 * (a[d] + b[d]);
    }

    // Partition: negative margin -> left, positive -> right, zero -> coin flip.
    std::vector<std::uint32_t> left, right;
    left.reserve(n);
    right.reserve(n);
    for (std::size_t i = lo; i < hi; ++i) {
      const double m = simd::dot(normal, points.at(ids[i])) - offset;
      const bool go_right = m > 0.0 || (m == 0.0 && (rng() & 1U));
      (go_right ? right : left).push_back(ids[i]);
    }
    if (left.empty() || right.empty()) {
      std::vector<std::uint32_t> merged(ids.begin() + static_cast<std::ptrdiff_t>(lo),
                                        ids.begin() + static_cast<std::ptrdiff_t>(hi));
      left.assign(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(n / 2));
      right.assign(merged.begin() + static_cast<std::ptrdiff_t>(n / 2), merged.end());
    }
    std::copy(left.begin(), left.end(), ids.begin() + static_cast<std::ptrdiff_t>(lo));
    std::copy(right.begin(), right.end(), ids.begin() + static_cast<std::ptrdiff_t>(lo + left.size()));
    const std::size_t mid = lo + left.size();

    const auto index = static_cast<std::uint32_t>(tree.nodes.size());
    RPForest::Node node;
    node.begin = static_cast<std::uint32_t>(tree.planes.size());
    node.offset = offset;
    tree.planes.insert(tree.planes.end(), normal.begin(), normal.end());
    tree.nodes.push_back(node);
    const std::uint32_t l = build(lo, mid, depth + 1);
    const std::uint32_t r = build(mid, hi, depth + 1);
    tree.nodes[index].left = l;
    tree.nodes[index].right = r;
    return index;
  }
};

std::vector<double> unit_copy(const VectorTable& table) {
  std::vector<double> out(table.data().begin(), table.data().end());
  for (std::size_t id = 0; id < table.size(); ++id) {
    const double n = table.norm(id);
    if (n == 0.0) continue;
    for (std::size_t d = 0; d < table.dim(); ++d) out[id * table.dim() + d] /= n;
  }
  return out;
}

}  // namespace

RPForest RPForest::build(VectorTable table, const IndexConfig& config, std::size_t workers) {
  config.validate();
  if (table.empty()) throw DataError("cannot build an index over zero vectors");
  RPForest forest(std::move(table), config);
  forest.trees_.resize(config.n_trees);
  parallel_for(config.n_trees, workers, [&](std::size_t t) {
    forest.trees_[t] = forest.build_tree(splitmix64(config.seed ^ splitmix64(t)));
  });
  return forest;
}

RPForest::Tree RPForest::build_tree(std::uint64_t seed) const {
  std::vector<double> unit;
  SplitPoints points{table_.dim(), table_.data()};
  if (config_.metric == Metric::cosine) {
    unit = unit_copy(table_);
    points.data = unit;
  }
  TreeBuilder builder{points, config_.leaf_size, std::mt19937_64(seed), {}, {}, {}};
  builder.ids.resize(table_.size());
  for (std::size_t i = 0; i < table_.size(); ++i) builder.ids[i] = static_cast<std::uint32_t>(i);
  builder.build(0, table_.size(), 0);
  return std::move(builder.tree);
}

std::size_t RPForest::depth(std::size_t tree) const {
  const auto& nodes = trees_.at(tree).nodes;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
  std::size_t best = 0;
  while (!stack.empty()) {
    auto [node, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes[node].leaf) {
      stack.emplace_back(nodes[node].left, d + 1);
      stack.emplace_back(nodes[node].right, d + 1);
    }
  }
  return best;
}

std::vector<Neighbor> RPForest::query_knn(std::span<const double> q, std::size_t k,
                                          std::optional<std::string_view> exclude_image,
                                          std::optional<std::size_t> budget) const {
  check_query(table_, q, k);
  const auto excluded = excluded_index(table_, exclude_image);
  const std::size_t limit = budget.value_or(config_.budget_for(k));
  if (limit < k) throw std::invalid_argument("search budget must be >= K");

  const double qnorm = std::sqrt(simd::dot(q, q));
  std::vector<double> unit_q;
  std::span<const double> split_q = q;
  if (config_.metric == Metric::cosine && qnorm > 0.0) {
    unit_q.assign(q.begin(), q.end());
    for (double& x : unit_q) x /= qnorm;
    split_q = unit_q;
  }

  using Entry = std::tuple<double, std::uint32_t, std::uint32_t>;  // priority, tree, node
  std::priority_queue<Entry> queue;
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    queue.emplace(std::numeric_limits<double>::infinity(), static_cast<std::uint32_t>(t), 0U);
  }

  std::vector<char> seen(table_.size(), 0);
  std::vector<Neighbor> candidates;
  candidates.reserve(std::min(limit + 64, table_.size()));
  const std::size_t dim = table_.dim();
  while (!queue.empty() && candidates.size() < limit) {
    const auto [priority, t, n] = queue.top();
    queue.pop();
    const Tree& tree = trees_[t];
    const Node& node = tree.nodes[n];
    if (node.leaf) {
      for (std::uint32_t s = node.begin; s < node.begin + node.count; ++s) {
        const std::uint32_t id = tree.ids[s];
        if (seen[id]) continue;
        seen[id] = 1;
        if (excluded && table_.image_index(id) == *excluded) continue;
        candidates.push_back({id, 0.0});
      }
      continue;
    }
    const std::span<const double> plane(tree.planes.data() + node.begin, dim);
    const double margin = simd::dot(plane, split_q) - node.offset;
    queue.emplace(std::min(priority, margin), t, node.right);
    queue.emplace(std::min(priority, -margin), t, node.left);
  }

  for (auto& c : candidates) {
    c.distance = metric_distance(config_.metric, q, qnorm, table_.vector(c.id), table_.norm(c.id));
  }
  rank_neighbors(table_, candidates, k);
  return candidates;
}

// ---------------------------------------------------------------------------
// U1IX persistence: magic, version, config echo, dim, N, trees (pre-order),
// vector table, keys. Little-endian throughout.

namespace {

constexpr std::uint32_t kIndexVersion = 1;

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::byte*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::byte*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> in) : in_(in) {}
  template <typename T>
  T get() {
    T v;
    get_bytes(&v, sizeof(T));
    return v;
  }
  void get_bytes(void* dst, std::size_t n) {
    if (n > in_.size() - pos_) throw DataError("U1IX: truncated file");
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

void write_node(ByteWriter& w, const RPForest::Tree& tree, std::uint32_t index, std::size_t dim) {
  const auto& node = tree.nodes[index];
  w.put<std::uint8_t>(node.leaf ? 1 : 0);
  if (node.leaf) {
    w.put<std::uint32_t>(node.count);
    w.put_bytes(tree.ids.data() + node.begin, node.count * sizeof(std::uint32_t));
    return;
  }
  w.put<double>(node.offset);
  w.put_bytes(tree.planes.data() + node.begin, dim * sizeof(double));
  write_node(w, tree, node.left, dim);
  write_node(w, tree, node.right, dim);
}

std::uint32_t read_node(ByteReader& r, RPForest::Tree& tree, std::size_t dim, std::size_t n_vectors,
                        std::size_t depth) {
  if (depth > kMaxDepth) throw DataError("U1IX: tree too deep");
  const auto tag = r.get<std::uint8_t>();
  RPForest::Node node;
  const auto index = static_cast<std::uint32_t>(tree.nodes.size());
  if (tag == 1) {
    node.leaf = true;
    node.count = r.get<std::uint32_t>();
    node.begin = static_cast<std::uint32_t>(tree.ids.size());
    if (node.count > n_vectors) throw DataError("U1IX: leaf larger than vector table");
    tree.ids.resize(tree.ids.size() + node.count);
    r.get_bytes(tree.ids.data() + node.begin, node.count * sizeof(std::uint32_t));
    for (std::uint32_t s = node.begin; s < node.begin + node.count; ++s) {
      if (tree.ids[s] >= n_vectors) throw DataError("U1IX: leaf id out of range");
    }
    tree.nodes.push_back(node);
    return index;
  }
  if (tag != 0) throw DataError("U1IX: bad node tag");
  node.offset = r.get<double>();
  node.begin = static_cast<std::uint32_t>(tree.planes.size());
  tree.planes.resize(tree.planes.size() + dim);
  r.get_bytes(tree.planes.data() + node.begin, dim * sizeof(double));
  tree.nodes.push_back(node);
  const std::uint32_t l = read_node(r, tree, dim, n_vectors, depth + 1);
  const std::uint32_t rr = read_node(r, tree, dim, n_vectors, depth + 1);
  tree.nodes[index].left = l;
  tree.nodes[index].right = rr;
  return index;
}

}  // namespace

std::vector<std::byte> RPForest::serialize() const {
  ByteWriter w;
  w.put_bytes("U1IX", 4);
  w.put<std::uint32_t>(kIndexVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(config_.n_trees));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(config_.leaf_size));
  w.put<std::uint64_t>(config_.seed);
  w.put<std::uint8_t>(config_.metric == Metric::cosine ? 1 : 0);
  w.put_bytes("\0\0\0", 3);
  w.put<std::uint64_t>(config_.search_budget);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(table_.dim()));
  w.put<std::uint64_t>(table_.size());
  for (const auto& tree : trees_) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tree.nodes.size()));
    write_node(w, tree, 0, table_.dim());
  }
  w.put_bytes(table_.data().data(), table_.data().size_bytes());
  for (const auto& key : table_.keys()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(key.image_id.size()));
    w.put_bytes(key.image_id.data(), key.image_id.size());
    w.put<std::uint32_t>(key.row);
    w.put<std::uint32_t>(key.col);
    w.put<std::int64_t>(key.class_id);
  }
  return w.take();
}

RPForest RPForest::deserialize(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, "U1IX", 4) != 0) throw DataError("U1IX: bad magic bytes");
  if (const auto v = r.get<std::uint32_t>(); v != kIndexVersion) {
    throw DataError(fmt::format("U1IX: unsupported version {}", v));
  }
  IndexConfig config;
  config.n_trees = r.get<std::uint32_t>();
  config.leaf_size = r.get<std::uint32_t>();
  config.seed = r.get<std::uint64_t>();
  const auto metric = r.get<std::uint8_t>();
  if (metric > 1) throw DataError("U1IX: bad metric tag");
  config.metric = metric == 1 ? Metric::cosine : Metric::euclidean;
  char reserved[3];
  r.get_bytes(reserved, 3);
  config.search_budget = r.get<std::uint64_t>();
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("U1IX: ") + e.what());
  }
  const std::size_t dim = r.get<std::uint32_t>();
  const std::size_t n = r.get<std::uint64_t>();
  if (dim == 0 || n == 0) throw DataError("U1IX: empty index");
  if (n > bytes.size() / (dim * sizeof(double))) throw DataError("U1IX: truncated file");

  std::vector<Tree> trees(config.n_trees);
  for (auto& tree : trees) {
    const std::size_t node_count = r.get<std::uint32_t>();
    read_node(r, tree, dim, n, 0);
    if (tree.nodes.size() != node_count) throw DataError("U1IX: node count mismatch");
  }
  std::vector<double> data(n * dim);
  r.get_bytes(data.data(), data.size() * sizeof(double));
  VectorTable table(dim);
  for (std::size_t id = 0; id < n; ++id) {
    VectorKey key;
    key.image_id.resize(r.get<std::uint32_t>());
    r.get_bytes(key.image_id.data(), key.image_id.size());
    key.row = r.get<std::uint32_t>();
    key.col = r.get<std::uint32_t>();
    key.class_id = r.get<std::int64_t>();
    table.add(std::span<const double>(data).subspan(id * dim, dim), std::move(key));
  }
  if (!r.done()) throw DataError("U1IX: trailing bytes");
  RPForest forest(std::move(table), config);
  forest.trees_ = std::move(trees);
  return forest;
}

void RPForest::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write index " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

RPForest RPForest::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open index " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(std::as_bytes(std::span<const char>(raw)));
}

}  // namespace u1
