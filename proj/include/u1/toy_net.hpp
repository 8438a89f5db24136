#pragma once

// A small dense network with two heads on the final hidden state: a class
// head (logits) and a 2-output U(1) head predicting (x, y). Each layer maps
// I_{t+1} = I_t . W_t + b_t, followed by ReLU on hidden layers. Forward,
// loss and backward are written out by hand in double precision.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "u1/labels.hpp"

namespace u1 {

/// Row-major batch matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return std::span(data).subspan(r * cols, cols); }
  std::span<double> row(std::size_t r) { return std::span(data).subspan(r * cols, cols); }
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // in x out, row-major
  std::vector<double> bias;    // out

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct NetConfig {
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden{32};
  std::size_t n_classes = 8;
  std::vector<std::size_t> u1_hidden;  // empty: the U(1) head is one dense layer
};

struct ToyNet {
  std::vector<DenseLayer> trunk;     // ReLU after each
  DenseLayer class_head;
  std::vector<DenseLayer> u1_head;   // ReLU between, none after the last

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights and biases.
  static ToyNet init(const NetConfig& config, std::uint64_t seed);
  /// Same shapes, all parameters zero.
  static ToyNet zeros_like(const ToyNet& net);

  std::size_t input_dim() const { return trunk.empty() ? class_head.in : trunk.front().in; }
  std::size_t n_classes() const { return class_head.out; }

  /// Every parameter buffer in a fixed order: trunk, class head, u1 head;
  /// weight before bias.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::size_t parameter_count() const;
  std::uint64_t checksum() const;

  friend bool operator==(const ToyNet&, const ToyNet&) = default;
};

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> trunk_pre;   // pre-activations
  std::vector<Matrix> trunk_post;  // ReLU outputs
  std::vector<Matrix> u1_pre;
  std::vector<Matrix> u1_post;
  Matrix logits;
  Matrix u1_pred;
  bool valid = false;
};

/// Throws DataError on an input width mismatch and DivergenceError when an
/// activation is not finite.
ForwardCache forward(const ToyNet& net, const Matrix& input);

struct LossTerms {
  double total = 0.0;
  double ce = 0.0;
  double u1 = 0.0;
  Matrix d_logits;  // dL/dlogits
  Matrix d_u1;      // dL/du1_pred
};

/// Batch mean of CE(softmax(logits), onehot) + lambda * ||u1 - label||^2.
/// `labels` is looked up by class_id; an unknown class_id throws.
LossTerms combined_loss(const Matrix& logits, const Matrix& u1_pred,
                        std::span<const std::int64_t> class_ids, std::span<const U1Label> labels,
                        double lambda);

/// Cross-entropy alone; d_u1 is left empty.
LossTerms one_hot_loss(const Matrix& logits, std::span<const std::int64_t> class_ids);

/// Parameter gradients for upstream gradients at the two heads. An absent
/// `d_u1` skips the U(1) head entirely (its gradients stay zero).
ToyNet backward(const ToyNet& net, const ForwardCache& cache, const Matrix& d_logits,
                const std::optional<Matrix>& d_u1);

/// Adam with the common defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  explicit Adam(const ToyNet& net, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ToyNet& net, const ToyNet& grads, double lr);
  std::size_t steps() const noexcept { return steps_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace u1
