#include "u1/toy_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <random>

#include <fmt/format.h>

#include "u1/errors.hpp"

namespace u1 {

namespace {

DenseLayer init_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  DenseLayer layer(in, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : layer.weight) w = bound * (2.0 * unit_uniform(rng) - 1.0);
  for (double& b : layer.bias) b = bound * (2.0 * unit_uniform(rng) - 1.0);
  return layer;
}

DenseLayer zero_layer(const DenseLayer& like) { return DenseLayer(like.in, like.out); }

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  Matrix y(x.rows, layer.out);
  for (std::size_t r = 0; r < x.rows; ++r) {
    double* yr = y.data.data() + r * layer.out;
    std::copy(layer.bias.begin(), layer.bias.end(), yr);
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double xi = x(r, i);
      const double* wi = layer.weight.data() + i * layer.out;
      for (std::size_t o = 0; o < layer.out; ++o) yr[o] += xi * wi[o];
    }
  }
  return y;
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

void check_finite(const Matrix& m, const char* what) {
  for (double v : m.data) {
    if (!std::isfinite(v)) throw DivergenceError(fmt::format("non-finite value in {}", what));
  }
}

// Accumulates parameter gradients into `grad` and returns dL/dx.
Matrix dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& dy, DenseLayer& grad) {
  Matrix dx(x.rows, layer.in);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* dyr = dy.data.data() + r * layer.out;
    for (std::size_t o = 0; o < layer.out; ++o) grad.bias[o] += dyr[o];
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double xi = x(r, i);
      const double* wi = layer.weight.data() + i * layer.out;
      double* gwi = grad.weight.data() + i * layer.out;
      double acc = 0.0;
      for (std::size_t o = 0; o < layer.out; ++o) {
        gwi[o] += xi * dyr[o];
        acc += dyr[o] * wi[o];
      }
      dx(r, i) = acc;
    }
  }
  return dx;
}

Matrix relu_backward(const Matrix& pre, Matrix d) {
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    if (!(pre.data[i] > 0.0)) d.data[i] = 0.0;
  }
  return d;
}

std::map<std::int64_t, const U1Label*> label_lookup(std::span<const U1Label> labels) {
  std::map<std::int64_t, const U1Label*> out;
  for (const auto& l : labels) out[l.class_id] = &l;
  return out;
}

}  // namespace

ToyNet ToyNet::init(const NetConfig& config, std::uint64_t seed) {
  if (config.input_dim == 0 || config.n_classes == 0) {
    throw std::invalid_argument("network needs a non-empty input and at least one class");
  }
  std::mt19937_64 rng(seed);
  ToyNet net;
  std::size_t width = config.input_dim;
  for (std::size_t h : config.hidden) {
    net.trunk.push_back(init_layer(width, h, rng));
    width = h;
  }
  net.class_head = init_layer(width, config.n_classes, rng);
  std::size_t u1_width = width;
  for (std::size_t h : config.u1_hidden) {
    net.u1_head.push_back(init_layer(u1_width, h, rng));
    u1_width = h;
  }
  net.u1_head.push_back(init_layer(u1_width, 2, rng));
  return net;
}

ToyNet ToyNet::zeros_like(const ToyNet& net) {
  ToyNet z;
  for (const auto& l : net.trunk) z.trunk.push_back(zero_layer(l));
  z.class_head = zero_layer(net.class_head);
  for (const auto& l : net.u1_head) z.u1_head.push_back(zero_layer(l));
  return z;
}

std::vector<std::span<double>> ToyNet::parameters() {
  std::vector<std::span<double>> out;
  auto add = [&](DenseLayer& l) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  };
  for (auto& l : trunk) add(l);
  add(class_head);
  for (auto& l : u1_head) add(l);
  return out;
}

std::vector<std::span<const double>> ToyNet::parameters() const {
  auto spans = const_cast<ToyNet*>(this)->parameters();
  return {spans.begin(), spans.end()};
}

std::size_t ToyNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

std::uint64_t ToyNet::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const auto& p : parameters()) {
    const auto bytes = std::as_bytes(p);
    for (std::byte b : bytes) {
      h ^= static_cast<std::uint64_t>(b);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

ForwardCache forward(const ToyNet& net, const Matrix& input) {
  if (input.cols != net.input_dim()) {
    throw DataError(fmt::format("network expects {} inputs, batch has {}", net.input_dim(), input.cols));
  }
  ForwardCache cache;
  cache.input = input;
  const Matrix* h = &cache.input;
  for (const auto& layer : net.trunk) {
    cache.trunk_pre.push_back(dense_forward(layer, *h));
    cache.trunk_post.push_back(relu(cache.trunk_pre.back()));
    h = &cache.trunk_post.back();
  }
  cache.logits = dense_forward(net.class_head, *h);
  const Matrix* u = h;
  for (std::size_t l = 0; l + 1 < net.u1_head.size(); ++l) {
    cache.u1_pre.push_back(dense_forward(net.u1_head[l], *u));
    cache.u1_post.push_back(relu(cache.u1_pre.back()));
    u = &cache.u1_post.back();
  }
  cache.u1_pred = dense_forward(net.u1_head.back(), *u);
  check_finite(cache.logits, "class logits");
  check_finite(cache.u1_pred, "U(1) head output");
  cache.valid = true;
  return cache;
}

LossTerms one_hot_loss(const Matrix& logits, std::span<const std::int64_t> class_ids) {
  if (class_ids.size() != logits.rows) throw std::invalid_argument("one class id per batch row");
  LossTerms t;
  t.d_logits = Matrix(logits.rows, logits.cols);
  const double inv_b = 1.0 / static_cast<double>(logits.rows);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto cls = class_ids[r];
    if (cls < 0 || static_cast<std::size_t>(cls) >= logits.cols) {
      throw std::invalid_argument(fmt::format("class id {} outside the class head", cls));
    }
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    t.ce += (log_z - row[static_cast<std::size_t>(cls)]) * inv_b;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      const double p = std::exp(row[c] - log_z);
      t.d_logits(r, c) = (p - (c == static_cast<std::size_t>(cls) ? 1.0 : 0.0)) * inv_b;
    }
  }
  t.total = t.ce;
  return t;
}

LossTerms combined_loss(const Matrix& logits, const Matrix& u1_pred,
                        std::span<const std::int64_t> class_ids, std::span<const U1Label> labels,
                        double lambda) {
  if (u1_pred.rows != logits.rows || u1_pred.cols != 2) {
    throw std::invalid_argument("U(1) predictions must be batch x 2");
  }
  const auto lookup = label_lookup(labels);
  LossTerms t = one_hot_loss(logits, class_ids);
  t.d_u1 = Matrix(u1_pred.rows, 2);
  const double inv_b = 1.0 / static_cast<double>(logits.rows);
  for (std::size_t r = 0; r < u1_pred.rows; ++r) {
    auto it = lookup.find(class_ids[r]);
    if (it == lookup.end()) throw std::invalid_argument(fmt::format("no label for class {}", class_ids[r]));
    const double dx = u1_pred(r, 0) - it->second->x;
    const double dy = u1_pred(r, 1) - it->second->y;
    t.u1 += (dx * dx + dy * dy) * inv_b;
    t.d_u1(r, 0) = 2.0 * lambda * dx * inv_b;
    t.d_u1(r, 1) = 2.0 * lambda * dy * inv_b;
  }
  t.total = t.ce + lambda * t.u1;
  return t;
}

ToyNet backward(const ToyNet& net, const ForwardCache& cache, const Matrix& d_logits,
                const std::optional<Matrix>& d_u1) {
  if (!cache.valid || cache.trunk_pre.size() != net.trunk.size()) {
    throw std::invalid_argument("backward needs the forward cache of this network");
  }
  if (d_logits.rows != cache.logits.rows || d_logits.cols != cache.logits.cols) {
    throw std::invalid_argument("upstream logit gradient has the wrong shape");
  }
  ToyNet grads = ToyNet::zeros_like(net);
  const Matrix& h = net.trunk.empty() ? cache.input : cache.trunk_post.back();
  Matrix dh = dense_backward(net.class_head, h, d_logits, grads.class_head);

  if (d_u1) {
    if (d_u1->rows != cache.u1_pred.rows || d_u1->cols != 2) {
      throw std::invalid_argument("upstream U(1) gradient has the wrong shape");
    }
    Matrix du = *d_u1;
    for (std::size_t l = net.u1_head.size(); l-- > 0;) {
      const Matrix& x = l == 0 ? h : cache.u1_post[l - 1];
      du = dense_backward(net.u1_head[l], x, du, grads.u1_head[l]);
      if (l > 0) du = relu_backward(cache.u1_pre[l - 1], std::move(du));
    }
    for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += du.data[i];
  }

  for (std::size_t l = net.trunk.size(); l-- > 0;) {
    dh = relu_backward(cache.trunk_pre[l], std::move(dh));
    const Matrix& x = l == 0 ? cache.input : cache.trunk_post[l - 1];
    dh = dense_backward(net.trunk[l], x, dh, grads.trunk[l]);
  }
  return grads;
}

Adam::Adam(const ToyNet& net, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : net.parameters()) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step(ToyNet& net, const ToyNet& grads, double lr) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  const double step_size = lr / bc1;
  const double bc2_sqrt = std::sqrt(bc2);
  auto params = net.parameters();
  const auto gs = grads.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double g = gs[k][i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double denom = std::sqrt(v[i]) / bc2_sqrt + eps_;
      params[k][i] -= step_size * m[i] / denom;
    }
  }
}

}  // namespace u1
