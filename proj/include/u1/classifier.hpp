#pragma once

// Memory-based classification over per-pixel activation vectors.
//
// For a query image I and memory set {I'}, each query pixel i retrieves its K
// nearest memory vectors NN_i from the whole memory and contributes
//
//     f(i, j) = exp(-||I_i - I'_j||^2 / (alpha_i^2 + epsilon))
//
// to the class of each neighbor j, where alpha_i is the distance to the
// nearest memory vector. Class scores are divided by the number of memory
// vectors of that class, and the class with the largest score wins (lowest
// class_id on ties).

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "u1/activation.hpp"
#include "u1/ann_index.hpp"
#include "u1/manifest.hpp"

namespace u1 {

struct LabeledMap {
  std::string image_id;
  std::int64_t class_id = 0;
  ActivationMap map;
};

struct ClassifierConfig {
  std::size_t k = 10;
  double epsilon = 1e-8;
  Metric metric = Metric::euclidean;
  bool normalize_vectors = true;
  bool exclude_same_image = true;
  bool exact = false;          // full-scan retrieval instead of the forest
  std::size_t search_budget = 0;  // 0: forest default

  /// epsilon == 0 is accepted as a test mode; see kernel_similarity.
  void validate() const;
};

struct GridShape {
  std::size_t height = 0;
  std::size_t width = 0;
};

class MemoryBank {
 public:
  /// Indexes every pixel vector of `maps`. The index metric is taken from
  /// `index_config`; `normalize` unit-normalizes vectors before storage.
  static MemoryBank build(std::span<const LabeledMap> maps, bool normalize,
                          const IndexConfig& index_config, std::size_t workers = 1);
  static MemoryBank from_forest(RPForest forest, bool normalized);

  const RPForest& index() const noexcept { return forest_; }
  const VectorTable& table() const noexcept { return forest_.table(); }
  Metric metric() const noexcept { return forest_.config().metric; }
  bool normalized() const noexcept { return normalized_; }
  std::size_t channels() const noexcept { return forest_.table().dim(); }
  std::size_t size() const noexcept { return forest_.table().size(); }

  /// class_id -> number of stored pixel vectors of that class.
  const std::map<std::int64_t, std::size_t>& class_count() const noexcept { return class_count_; }
  /// Grid shape of a stored image (every pixel of an image is stored).
  GridShape shape_of(const std::string& image_id) const;

 private:
  MemoryBank(RPForest forest, bool normalized);

  RPForest forest_;
  bool normalized_ = true;
  std::map<std::int64_t, std::size_t> class_count_;
  std::map<std::string, GridShape> shapes_;
};

struct LikelihoodTable {
  std::map<std::int64_t, double> scores;
  std::int64_t best = -1;

  /// (class_id, score) pairs by descending score, ascending class_id on ties.
  std::vector<std::pair<std::int64_t, double>> ranked() const;
};

/// Neighbors retrieved for one query pixel. Distances are Euclidean, or the
/// chordal sqrt(2 * cosine distance) under the cosine metric.
struct PixelMatches {
  std::size_t row = 0;
  std::size_t col = 0;
  double alpha = 0.0;
  std::vector<Neighbor> neighbors;
};

double kernel_similarity(double distance, double alpha, double epsilon);

/// Distance from q to its nearest memory vector, honoring exclusion.
double adaptive_bandwidth(std::span<const double> q, const MemoryBank& bank,
                          const ClassifierConfig& config,
                          std::optional<std::string_view> exclude_image = {});

/// Per-pixel K-NN retrieval for a query image, in raster order. Pixels whose
/// every candidate was excluded are omitted.
std::vector<PixelMatches> retrieve_matches(const LabeledMap& query, const MemoryBank& bank,
                                           const ClassifierConfig& config);

LikelihoodTable likelihood_from_matches(std::span<const PixelMatches> matches,
                                        const MemoryBank& bank, const ClassifierConfig& config);

LikelihoodTable image_likelihood(const LabeledMap& query, const MemoryBank& bank,
                                 const ClassifierConfig& config);

std::int64_t classify(const LabeledMap& query, const MemoryBank& bank,
                      const ClassifierConfig& config);

struct QueryOutcome {
  std::string image_id;
  std::int64_t truth = 0;
  std::int64_t prediction = 0;
  std::vector<std::pair<std::int64_t, double>> top;  // up to 3
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::int64_t> classes;              // sorted union of truth and predictions
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction], indexed like classes
  std::map<std::int64_t, double> per_class_accuracy;
  std::vector<QueryOutcome> queries;
};

/// Classifies every query (in parallel over `workers`, results in input
/// order). Throws std::invalid_argument on an empty query set.
EvalResult evaluate(std::span<const LabeledMap> queries, const MemoryBank& bank,
                    const ClassifierConfig& config, std::size_t workers = 1);

nlohmann::json to_json(const ClassifierConfig& config);
nlohmann::json to_json(const IndexConfig& config);
nlohmann::json to_json(const LikelihoodTable& table);

/// Per-query CSV: image_id,truth,prediction,top1_class,top1_score,...,top3_score
std::string eval_csv(const EvalResult& result);
nlohmann::json eval_summary(const EvalResult& result, const ClassifierConfig& config,
                            const IndexConfig& index_config);

/// Reads every AMF named by the records into labeled maps.
std::vector<LabeledMap> load_labeled_maps(std::span<const MemoryRecord> records);

}  // namespace u1
