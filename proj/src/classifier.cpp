#include "u1/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "u1/errors.hpp"
#include "u1/parallel.hpp"

namespace u1 {

void ClassifierConfig::validate() const {
  if (k < 1) throw std::invalid_argument("K must be >= 1");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be >= 0");
}

MemoryBank::MemoryBank(RPForest forest, bool normalized)
    : forest_(std::move(forest)), normalized_(normalized) {
  const auto& table = forest_.table();
  for (const auto& key : table.keys()) {
    ++class_count_[key.class_id];
    auto& shape = shapes_[key.image_id];
    shape.height = std::max<std::size_t>(shape.height, key.row + 1);
    shape.width = std::max<std::size_t>(shape.width, key.col + 1);
  }
}

MemoryBank MemoryBank::build(std::span<const LabeledMap> maps, bool normalize,
                             const IndexConfig& index_config, std::size_t workers) {
  if (maps.empty()) throw DataError("memory bank needs at least one image");
  VectorTable table(maps.front().map.channels());
  for (const auto& m : maps) {
    if (m.map.channels() != table.dim()) {
      throw DataError(fmt::format("image '{}' has {} channels, memory has {}", m.image_id,
                                  m.map.channels(), table.dim()));
    }
    if (table.find_image(m.image_id)) throw DataError("duplicate image id in memory: " + m.image_id);
    for (const auto& pv : pixel_vectors(m.map, normalize, m.image_id, m.class_id)) table.add(pv);
  }
  return MemoryBank(RPForest::build(std::move(table), index_config, workers), normalize);
}

MemoryBank MemoryBank::from_forest(RPForest forest, bool normalized) {
  return MemoryBank(std::move(forest), normalized);
}

GridShape MemoryBank::shape_of(const std::string& image_id) const {
  auto it = shapes_.find(image_id);
  if (it == shapes_.end()) throw DataError("image not in memory: " + image_id);
  return it->second;
}

std::vector<std::pair<std::int64_t, double>> LikelihoodTable::ranked() const {
  std::vector<std::pair<std::int64_t, double>> out(scores.begin(), scores.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

double kernel_similarity(double distance, double alpha, double epsilon) {
  const double denom = alpha * alpha + epsilon;
  if (denom == 0.0) return distance == 0.0 ? 1.0 : 0.0;
  return std::exp(-(distance * distance) / denom);
}

namespace {

void check_compatible(const MemoryBank& bank, const ClassifierConfig& config) {
  config.validate();
  if (bank.size() == 0) throw DataError("memory bank is empty");
  if (config.metric != bank.metric()) {
    throw std::invalid_argument("classifier metric differs from the memory index metric");
  }
  if (config.normalize_vectors != bank.normalized()) {
    throw std::invalid_argument("classifier normalization differs from the memory bank's");
  }
}

double to_kernel_distance(Metric metric, double d) {
  return metric == Metric::cosine ? std::sqrt(2.0 * std::max(0.0, d)) : d;
}

std::vector<Neighbor> search(const MemoryBank& bank, const ClassifierConfig& config,
                             std::span<const double> q, std::size_t k,
                             std::optional<std::string_view> exclude) {
  auto nn = config.exact
                ? bank.index().exact_knn(q, k, exclude)
                : bank.index().query_knn(q, k, exclude,
                                         config.search_budget == 0
                                             ? std::nullopt
                                             : std::optional<std::size_t>(config.search_budget));
  for (auto& n : nn) n.distance = to_kernel_distance(bank.metric(), n.distance);
  return nn;
}

}  // namespace

double adaptive_bandwidth(std::span<const double> q, const MemoryBank& bank,
                          const ClassifierConfig& config,
                          std::optional<std::string_view> exclude_image) {
  check_compatible(bank, config);
  ClassifierConfig one = config;
  const auto nn = search(bank, one, q, 1, exclude_image);
  if (nn.empty()) throw DataError("no memory vector left after exclusion");
  return nn.front().distance;
}

std::vector<PixelMatches> retrieve_matches(const LabeledMap& query, const MemoryBank& bank,
                                           const ClassifierConfig& config) {
  check_compatible(bank, config);
  if (query.map.channels() != bank.channels()) {
    throw DataError(fmt::format("query '{}' has {} channels, memory has {}", query.image_id,
                                query.map.channels(), bank.channels()));
  }
  const std::optional<std::string_view> exclude =
      config.exclude_same_image ? std::optional<std::string_view>(query.image_id) : std::nullopt;
  std::vector<PixelMatches> out;
  out.reserve(query.map.pixel_count());
  for (auto& pv : pixel_vectors(query.map, config.normalize_vectors, query.image_id, query.class_id)) {
    auto nn = search(bank, config, pv.v, config.k, exclude);
    if (nn.empty()) continue;
    const double alpha = nn.front().distance;
    out.push_back({pv.row, pv.col, alpha, std::move(nn)});
  }
  return out;
}

LikelihoodTable likelihood_from_matches(std::span<const PixelMatches> matches,
                                        const MemoryBank& bank, const ClassifierConfig& config) {
  LikelihoodTable table;
  for (const auto& [cls, count] : bank.class_count()) table.scores[cls] = 0.0;
  for (const auto& pm : matches) {
    for (const auto& n : pm.neighbors) {
      table.scores[bank.table().key(n.id).class_id] +=
          kernel_similarity(n.distance, pm.alpha, config.epsilon);
    }
  }
  double best_score = -1.0;
  for (auto& [cls, score] : table.scores) {
    score /= static_cast<double>(bank.class_count().at(cls));
    if (score > best_score) {
      best_score = score;
      table.best = cls;
    }
  }
  return table;
}

LikelihoodTable image_likelihood(const LabeledMap& query, const MemoryBank& bank,
                                 const ClassifierConfig& config) {
  const auto matches = retrieve_matches(query, bank, config);
  return likelihood_from_matches(matches, bank, config);
}

std::int64_t classify(const LabeledMap& query, const MemoryBank& bank,
                      const ClassifierConfig& config) {
  return image_likelihood(query, bank, config).best;
}

EvalResult evaluate(std::span<const LabeledMap> queries, const MemoryBank& bank,
                    const ClassifierConfig& config, std::size_t workers) {
  if (queries.empty()) throw std::invalid_argument("evaluation needs at least one query");
  EvalResult result;
  result.queries.resize(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t i) {
    const auto table = image_likelihood(queries[i], bank, config);
    auto ranked = table.ranked();
    if (ranked.size() > 3) ranked.resize(3);
    result.queries[i] = {queries[i].image_id, queries[i].class_id, table.best, std::move(ranked)};
  });

  std::map<std::int64_t, std::size_t> slot;
  for (const auto& q : result.queries) {
    slot.emplace(q.truth, 0);
    slot.emplace(q.prediction, 0);
  }
  for (auto& [cls, s] : slot) {
    s = result.classes.size();
    result.classes.push_back(cls);
  }
  result.confusion.assign(result.classes.size(), std::vector<std::size_t>(result.classes.size(), 0));
  std::size_t correct = 0;
  std::map<std::int64_t, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
  for (const auto& q : result.queries) {
    ++result.confusion[slot[q.truth]][slot[q.prediction]];
    auto& pc = per_class[q.truth];
    ++pc.second;
    if (q.truth == q.prediction) {
      ++correct;
      ++pc.first;
    }
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(result.queries.size());
  for (const auto& [cls, pc] : per_class) {
    result.per_class_accuracy[cls] = static_cast<double>(pc.first) / static_cast<double>(pc.second);
  }
  return result;
}

nlohmann::json to_json(const ClassifierConfig& c) {
  return {{"k", c.k},
          {"epsilon", c.epsilon},
          {"metric", to_string(c.metric)},
          {"normalize_vectors", c.normalize_vectors},
          {"exclude_same_image", c.exclude_same_image},
          {"exact", c.exact},
          {"search_budget", c.search_budget}};
}

nlohmann::json to_json(const IndexConfig& c) {
  return {{"n_trees", c.n_trees},
          {"leaf_size", c.leaf_size},
          {"seed", c.seed},
          {"metric", to_string(c.metric)},
          {"search_budget", c.search_budget}};
}

nlohmann::json to_json(const LikelihoodTable& table) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& [cls, score] : table.scores) scores.push_back({{"class_id", cls}, {"score", score}});
  return {{"best", table.best}, {"scores", scores}};
}

std::string eval_csv(const EvalResult& result) {
  std::ostringstream out;
  out << "image_id,truth,prediction,top1_class,top1_score,top2_class,top2_score,top3_class,top3_score\n";
  for (const auto& q : result.queries) {
    out << fmt::format("{},{},{}", q.image_id, q.truth, q.prediction);
    for (std::size_t t = 0; t < 3; ++t) {
      if (t < q.top.size()) {
        out << fmt::format(",{},{}", q.top[t].first, q.top[t].second);
      } else {
        out << ",,";
      }
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json eval_summary(const EvalResult& result, const ClassifierConfig& config,
                            const IndexConfig& index_config) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [cls, acc] : result.per_class_accuracy) per_class[std::to_string(cls)] = acc;
  return {{"accuracy", result.accuracy},
          {"n_queries", result.queries.size()},
          {"per_class_accuracy", per_class},
          {"classes", result.classes},
          {"confusion", result.confusion},
          {"classifier", to_json(config)},
          {"index", to_json(index_config)}};
}

std::vector<LabeledMap> load_labeled_maps(std::span<const MemoryRecord> records) {
  std::vector<LabeledMap> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.image_id, r.class_id, load_activation_map(r.path)});
  return out;
}

}  // namespace u1
