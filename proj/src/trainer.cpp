#include "u1/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "u1/errors.hpp"

namespace u1 {

std::size_t Dataset::n_classes() const {
  return y.empty() ? 0 : static_cast<std::size_t>(*std::max_element(y.begin(), y.end()) + 1);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x = Matrix(rows.size(), x.cols);
  out.image_height = image_height;
  out.image_width = image_width;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.x.row(i).begin());
    out.y.push_back(y[rows[i]]);
  }
  return out;
}

Augmenter flip_crop_augmenter(std::size_t height, std::size_t width, std::size_t pad) {
  return [height, width, pad](std::span<double> sample, std::mt19937_64& rng) {
    if (sample.size() != height * width) throw std::invalid_argument("augmenter: sample is not an image");
    const bool flip = (rng() & 1U) != 0;
    const std::size_t off_r = rng() % (2 * pad + 1);
    const std::size_t off_c = rng() % (2 * pad + 1);
    const std::vector<double> src(sample.begin(), sample.end());
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        // Position in the padded image, then back to source coordinates.
        const long pr = static_cast<long>(r + off_r) - static_cast<long>(pad);
        const long pc = static_cast<long>(c + off_c) - static_cast<long>(pad);
        double v = 0.0;
        if (pr >= 0 && pc >= 0 && pr < static_cast<long>(height) && pc < static_cast<long>(width)) {
          const std::size_t sc = flip ? width - 1 - static_cast<std::size_t>(pc) : static_cast<std::size_t>(pc);
          v = src[static_cast<std::size_t>(pr) * width + sc];
        }
        sample[r * width + c] = v;
      }
    }
  };
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(lr_min >= 0.0) || lr_min > lr) throw std::invalid_argument("lr_min must lie in [0, lr]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (batch < 1) throw std::invalid_argument("batch size must be >= 1");
}

double cosine_lr(std::size_t t, std::size_t total, double lr0, double lr_min) {
  if (t == 0 || total == 0) return lr0;
  if (t >= total) return lr_min;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase));
}

namespace {

double angle_error_deg(double px, double py, const U1Label& label) {
  const double diff = std::remainder(std::atan2(py, px) - label.theta, 2.0 * std::numbers::pi);
  return std::abs(diff) * 180.0 / std::numbers::pi;
}

std::uint64_t fnv1a(std::span<const std::size_t> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t v : values) {
    for (int b = 0; b < 8; ++b) {
      h ^= (static_cast<std::uint64_t>(v) >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace

TrainResult train(ToyNet net, const Dataset& data, std::span<const U1Label> labels,
                  const TrainConfig& config) {
  config.validate();
  if (data.size() == 0) throw std::invalid_argument("training set is empty");
  std::map<std::int64_t, const U1Label*> lookup;
  for (const auto& l : labels) lookup[l.class_id] = &l;
  for (auto cls : std::set<std::int64_t>(data.y.begin(), data.y.end())) {
    if (config.objective == Objective::combined && !lookup.contains(cls)) {
      throw std::invalid_argument(fmt::format("no U(1) label for class {}", cls));
    }
  }

  std::mt19937_64 rng(config.seed);
  Adam adam(net);
  TrainResult result;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, config.epochs, config.lr, config.lr_min);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    std::size_t correct = 0, angular_count = 0;
    double angular_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t bs = std::min(config.batch, order.size() - start);
      Matrix xb(bs, data.x.cols);
      std::vector<std::int64_t> yb(bs);
      for (std::size_t r = 0; r < bs; ++r) {
        const auto src = data.x.row(order[start + r]);
        std::copy(src.begin(), src.end(), xb.row(r).begin());
        yb[r] = data.y[order[start + r]];
        if (config.augment) config.augment(xb.row(r), rng);
      }

      const auto cache = forward(net, xb);
      LossTerms terms = config.objective == Objective::combined
                            ? combined_loss(cache.logits, cache.u1_pred, yb, labels, config.lambda)
                            : one_hot_loss(cache.logits, yb);
      if (!std::isfinite(terms.total)) {
        throw DivergenceError(fmt::format("non-finite loss at epoch {} batch {} (lr {})", epoch,
                                          start / config.batch, lr));
      }
      const auto grads =
          backward(net, cache, terms.d_logits,
                   config.objective == Objective::combined ? std::optional<Matrix>(terms.d_u1)
                                                           : std::nullopt);
      adam.step(net, grads, lr);

      const double w = static_cast<double>(bs);
      m.loss += terms.total * w;
      m.ce += terms.ce * w;
      for (std::size_t r = 0; r < bs; ++r) {
        const auto row = cache.logits.row(r);
        const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
        if (pred == yb[r]) ++correct;
        auto it = lookup.find(yb[r]);
        if (it == lookup.end()) continue;
        const double dx = cache.u1_pred(r, 0) - it->second->x;
        const double dy = cache.u1_pred(r, 1) - it->second->y;
        m.u1 += dx * dx + dy * dy;
        if (it->second->x != 0.0 || it->second->y != 0.0) {
          angular_sum += angle_error_deg(cache.u1_pred(r, 0), cache.u1_pred(r, 1), *it->second);
          ++angular_count;
        }
      }
    }
    const double n = static_cast<double>(data.size());
    m.loss /= n;
    m.ce /= n;
    m.u1 /= n;
    m.accuracy = static_cast<double>(correct) / n;
    m.angular_error_deg = angular_count > 0 ? angular_sum / static_cast<double>(angular_count)
                                            : std::numeric_limits<double>::quiet_NaN();
    result.history.push_back(m);
  }
  result.net = std::move(net);
  return result;
}

double accuracy(const ToyNet& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const auto cache = forward(net, data.x);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto row = cache.logits.row(r);
    if (std::max_element(row.begin(), row.end()) - row.begin() == data.y[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string metrics_csv(std::span<const EpochMetrics> history) {
  std::ostringstream out;
  out << "epoch,lr,loss,ce,u1,accuracy,angular_error_deg\n";
  for (const auto& m : history) {
    out << fmt::format("{},{},{},{},{},{},{}\n", m.epoch, m.lr, m.loss, m.ce, m.u1, m.accuracy,
                       m.angular_error_deg);
  }
  return out.str();
}

AblationResult label_config_ablation(const Dataset& data, const AblationConfig& config) {
  if (config.seeds.size() < 2) throw std::invalid_argument("ablation needs at least two seeds");
  if (config.kinds.empty()) throw std::invalid_argument("ablation needs at least one label kind");
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
  const std::size_t n_classes = std::max(config.net.n_classes, data.n_classes());
  AblationResult result;
  result.controlled_init = true;
  result.controlled_split = true;

  for (std::uint64_t seed : config.seeds) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 split_rng(seed ^ 0x5eedULL);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[split_rng() % i]);
    const auto n_test = static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(order.size())));
    const std::span<const std::size_t> test_rows(order.data(), n_test);
    const std::span<const std::size_t> train_rows(order.data() + n_test, order.size() - n_test);
    const Dataset train_set = data.subset(train_rows);
    const Dataset test_set = data.subset(test_rows);
    const std::uint64_t split_sum = fnv1a(order);
    std::optional<std::uint64_t> seen_init, seen_split;
    for (std::size_t ki = 0; ki < config.kinds.size(); ++ki) {
      const LabelKind kind = config.kinds[ki];
      const ToyNet init =
          ToyNet::init(config.net, config.control_init ? seed : seed * 0x9e3779b97f4a7c15ULL + ki + 1);
      const auto labels = gen_labels({kind, seed, n_classes});
      TrainConfig tc = config.train;
      tc.seed = seed;
      if (kind == LabelKind::centered) tc.objective = Objective::one_hot;
      const auto trained = train(init, train_set, labels, tc);
      AblationRun run{kind, seed, accuracy(trained.net, train_set), accuracy(trained.net, test_set),
                      init.checksum(), split_sum};
      if (seen_init && *seen_init != run.init_checksum) result.controlled_init = false;
      if (seen_split && *seen_split != run.split_checksum) result.controlled_split = false;
      seen_init = run.init_checksum;
      seen_split = run.split_checksum;
      result.runs.push_back(run);
    }
  }

  for (LabelKind kind : config.kinds) {
    AblationRow row{kind, 0.0, 0.0, 0};
    std::vector<double> acc;
    for (const auto& run : result.runs) {
      if (run.kind == kind) acc.push_back(run.test_accuracy);
    }
    row.n_seeds = acc.size();
    row.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
    double ss = 0.0;
    for (double a : acc) ss += (a - row.mean) * (a - row.mean);
    row.stddev = acc.size() > 1 ? std::sqrt(ss / static_cast<double>(acc.size() - 1)) : 0.0;
    result.rows.push_back(row);
  }
  return result;
}

std::string ablation_csv(const AblationResult& result) {
  std::ostringstream out;
  out << "kind,mean,std,n_seeds\n";
  for (const auto& row : result.rows) {
    out << fmt::format("{},{},{},{}\n", to_string(row.kind), row.mean, row.stddev, row.n_seeds);
  }
  return out.str();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.lr},
          {"lr_min", c.lr_min},
          {"batch", c.batch},
          {"seed", c.seed},
          {"lambda", c.lambda},
          {"objective", c.objective == Objective::combined ? "combined" : "one_hot"},
          {"augment", static_cast<bool>(c.augment)}};
}

}  // namespace u1
