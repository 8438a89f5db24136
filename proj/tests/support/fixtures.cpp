#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "u1/labels.hpp"

namespace u1::test {

ActivationMap random_map(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng,
                         bool nonneg) {
  std::vector<float> values(h * w * c);
  for (auto& v : values) {
    const double u = unit_uniform(rng);
    v = static_cast<float>(nonneg ? u : 2.0 * u - 1.0);
  }
  return ActivationMap(h, w, c, std::move(values), nonneg);
}

std::vector<double> random_vector(std::size_t dim, std::mt19937_64& rng) {
  std::vector<double> v(dim);
  for (auto& x : v) x = 2.0 * unit_uniform(rng) - 1.0;
  return v;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          fmt::format("u1-test-{}-{}", rd(), counter.fetch_add(1));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

LobeDataset make_lobe_dataset(const LobeParams& p) {
  std::mt19937_64 rng(p.seed);
  LobeDataset out;
  std::vector<std::vector<double>> directions(p.n_classes);
  for (auto& d : directions) {
    d.resize(p.channels);
    for (auto& x : d) x = unit_uniform(rng);
  }

  const double half = (static_cast<double>(p.side) - 1.0) / 2.0;
  for (std::size_t c = 0; c < p.n_classes; ++c) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(c) /
                             static_cast<double>(p.n_classes) + p.angle_offset;
    out.class_angles.push_back(theta);
    const double cx = p.lobe_radius * std::cos(theta);
    const double cy = p.lobe_radius * std::sin(theta);
    for (std::size_t i = 0; i < p.per_class; ++i) {
      const double sigma = p.hard_every > 0 && i % p.hard_every == 0 ? p.hard_noise : p.noise;
      std::vector<float> values(p.side * p.side * p.channels);
      for (std::size_t r = 0; r < p.side; ++r) {
        for (std::size_t col = 0; col < p.side; ++col) {
          const double x = static_cast<double>(col) - half;
          const double y = half - static_cast<double>(r);
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          const double amp = std::exp(-d2 / (2.0 * p.lobe_width * p.lobe_width));
          for (std::size_t k = 0; k < p.channels; ++k) {
            const double v = (amp + p.background) * directions[c][k] +
                             sigma * standard_normal(rng);
            values[(r * p.side + col) * p.channels + k] = static_cast<float>(v);
          }
        }
      }
      out.maps.push_back({fmt::format("c{}_{:03}", c, i), static_cast<std::int64_t>(c),
                          ActivationMap(p.side, p.side, p.channels, std::move(values), false)});
    }
  }
  return out;
}

namespace {

std::vector<double> pixel(const ActivationMap& map, std::size_t r, std::size_t c, bool normalize) {
  std::vector<double> v;
  double norm = 0.0;
  for (std::size_t k = 0; k < map.channels(); ++k) {
    v.push_back(map.at(r, c, k));
    norm += v.back() * v.back();
  }
  if (normalize) {
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
  }
  return v;
}

}  // namespace

std::map<std::int64_t, double> oracle_likelihood(const LabeledMap& query,
                                                 const std::vector<LabeledMap>& memory,
                                                 std::size_t k, double epsilon, bool normalize,
                                                 bool exclude_same_image) {
  struct Entry {
    double d2;
    std::string image;
    std::size_t row, col;
    std::int64_t cls;
  };
  std::map<std::int64_t, double> count, score;
  for (const auto& m : memory) {
    count[m.class_id] += static_cast<double>(m.map.pixel_count());
    score[m.class_id] = 0.0;
  }
  for (std::size_t qr = 0; qr < query.map.height(); ++qr) {
    for (std::size_t qc = 0; qc < query.map.width(); ++qc) {
      const auto q = pixel(query.map, qr, qc, normalize);
      std::vector<Entry> all;
      for (const auto& m : memory) {
        if (exclude_same_image && m.image_id == query.image_id) continue;
        for (std::size_t r = 0; r < m.map.height(); ++r) {
          for (std::size_t c = 0; c < m.map.width(); ++c) {
            const auto v = pixel(m.map, r, c, normalize);
            double d2 = 0.0;
            for (std::size_t i = 0; i < q.size(); ++i) d2 += (q[i] - v[i]) * (q[i] - v[i]);
            all.push_back({d2, m.image_id, r, c, m.class_id});
          }
        }
      }
      if (all.empty()) continue;
      std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.d2, a.image, a.row, a.col) < std::tie(b.d2, b.image, b.row, b.col);
      });
      all.resize(std::min(k, all.size()));
      const double alpha2 = all.front().d2;
      for (const auto& e : all) {
        score[e.cls] += alpha2 + epsilon == 0.0 ? (e.d2 == 0.0 ? 1.0 : 0.0)
                                                : std::exp(-e.d2 / (alpha2 + epsilon));
      }
    }
  }
  for (auto& [cls, s] : score) s /= count[cls];
  return score;
}

std::filesystem::path write_fixture(const std::filesystem::path& dir,
                                    const std::vector<LabeledMap>& maps,
                                    const std::vector<std::size_t>& query_rows) {
  std::filesystem::create_directories(dir);
  const std::set<std::size_t> queries(query_rows.begin(), query_rows.end());
  std::vector<MemoryRecord> records;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto file = dir / (maps[i].image_id + ".amf");
    save_activation_map(maps[i].map, file);
    records.push_back({maps[i].image_id, maps[i].class_id, fmt::format("class{}", maps[i].class_id),
                       queries.contains(i) ? Split::query : Split::memory, file});
  }
  const auto manifest = dir / "manifest.jsonl";
  write_manifest(records, manifest);
  return manifest;
}

double gradient_check(const ToyNet& net, const Matrix& x, std::span<const std::int64_t> y,
                      std::span<const U1Label> labels, double lambda, double h) {
  auto loss_at = [&](const ToyNet& n) {
    const auto cache = forward(n, x);
    return combined_loss(cache.logits, cache.u1_pred, y, labels, lambda).total;
  };
  const auto cache = forward(net, x);
  const auto terms = combined_loss(cache.logits, cache.u1_pred, y, labels, lambda);
  const ToyNet grads = backward(net, cache, terms.d_logits, terms.d_u1);
  const auto analytic = grads.parameters();

  ToyNet probe = net;
  auto params = probe.parameters();
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double saved = params[k][i];
      params[k][i] = saved + h;
      const double up = loss_at(probe);
      params[k][i] = saved - h;
      const double down = loss_at(probe);
      params[k][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace u1::test
