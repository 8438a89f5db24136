#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "u1/labels.hpp"
#include "u1/toy_net.hpp"

namespace u1 {

struct Dataset {
  Matrix x;
  std::vector<std::int64_t> y;
  std::size_t image_height = 0;  // nonzero when rows are flattened images
  std::size_t image_width = 0;

  std::size_t size() const { return y.size(); }
  std::size_t n_classes() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

/// In-place per-sample augmentation, drawn from the trainer's RNG.
using Augmenter = std::function<void(std::span<double> sample, std::mt19937_64& rng)>;

/// Horizontal flip with probability 1/2, then a random crop of the
/// zero-padded image back to its original size.
Augmenter flip_crop_augmenter(std::size_t height, std::size_t width, std::size_t pad);

enum class Objective { combined, one_hot };

struct TrainConfig {
  std::size_t epochs = 100;
  double lr = 1e-3;
  double lr_min = 0.0;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  double lambda = 1.0;
  Objective objective = Objective::combined;
  Augmenter augment;  // optional

  void validate() const;
};

/// lr(t) = lr_min + (lr0 - lr_min) (1 + cos(pi t / T)) / 2, with
/// lr(0) = lr0 and lr(T) = lr_min returned exactly.
double cosine_lr(std::size_t t, std::size_t total, double lr0, double lr_min);

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double ce = 0.0;
  double u1 = 0.0;
  double accuracy = 0.0;
  double angular_error_deg = 0.0;  // NaN when every label sits at the origin
};

struct TrainResult {
  ToyNet net;
  std::vector<EpochMetrics> history;
};

/// Mini-batch Adam under the cosine schedule. Single-threaded and
/// deterministic in (net, data, labels, config). Throws DivergenceError on a
/// non-finite loss.
TrainResult train(ToyNet net, const Dataset& data, std::span<const U1Label> labels,
                  const TrainConfig& config);

double accuracy(const ToyNet& net, const Dataset& data);

std::string metrics_csv(std::span<const EpochMetrics> history);

struct AblationConfig {
  std::vector<LabelKind> kinds{LabelKind::centered, LabelKind::discrete, LabelKind::uniform,
                               LabelKind::unit_circle};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  NetConfig net;
  TrainConfig train;
  double test_fraction = 0.3;
  bool control_init = true;  // false: each kind draws its own initial weights
};

struct AblationRun {
  LabelKind kind = LabelKind::unit_circle;
  std::uint64_t seed = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t init_checksum = 0;
  std::uint64_t split_checksum = 0;
};

struct AblationRow {
  LabelKind kind = LabelKind::unit_circle;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  std::size_t n_seeds = 0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<AblationRun> runs;
  bool controlled_init = false;   // every kind saw identical initial weights per seed
  bool controlled_split = false;  // and identical train/test splits
};

/// Trains one network per (kind, seed) with identical budgets. For a given
/// seed all kinds share the split and the initial weights. The centered kind
/// trains on the one-hot objective alone.
AblationResult label_config_ablation(const Dataset& data, const AblationConfig& config);

std::string ablation_csv(const AblationResult& result);
nlohmann::json to_json(const TrainConfig& config);

}  // namespace u1
