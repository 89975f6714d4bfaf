#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "perminv/mat.hpp"

namespace perminv {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint64_t tape = 0;
  std::size_t index = 0;
};

/// Parameter gradients produced by Tape::backward, keyed by the address of
/// the parameter matrix that was registered with Tape::parameter.
class Gradients {
 public:
  /// Gradient for `param`; all zeros when the parameter was never reached.
  Mat get(const Mat& param) const;
  bool contains(const Mat& param) const { return grads_.contains(&param); }
  /// Pointer to the stored gradient, or nullptr when never reached.
  const Mat* find(const Mat& param) const;
  void accumulate(const Mat* param, const Mat& grad);
  std::size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<const Mat*, Mat> grads_;
};

/// Constants entering the clipped-surrogate loss for one minibatch.
struct PpoBatch {
  Mat actions;  // B x action_dim, unclipped samples
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;
  double clip = 0.1;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
};

/// Loss components reported by Tape::ppo_loss.
struct PpoTerms {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

/// Reverse-mode recorder over matrix-level primitives. Values are computed
/// eagerly as operations are recorded; backward() replays the record in
/// reverse, visiting each node once.
class Tape {
 public:
  Tape();

  Var constant(Mat value);
  /// Registers `param` as a differentiable leaf. The matrix must outlive the tape.
  Var parameter(const Mat& param);

  /// x w + b (b broadcast over rows).
  Var affine(Var x, Var w, Var b);
  Var activation(Var x, Activation kind, double slope = 0.01);
  /// Softmax of a column of scores within each row segment
  /// [offsets[s], offsets[s+1]). Empty segments are allowed.
  Var segment_softmax(Var scores, std::vector<std::size_t> offsets);
  /// Row s of the result is sum_{i in segment s} weights_i * values_i;
  /// an empty segment yields a zero row.
  Var segment_weighted_sum(Var values, Var weights, std::vector<std::size_t> offsets);
  /// Column-wise concatenation; all parts share the row count.
  Var concat_cols(const std::vector<Var>& parts);
  /// Sum of all entries (1x1).
  Var sum(Var x);
  /// sum(x .* coeffs) (1x1).
  Var dot(Var x, Mat coeffs);
  /// Clipped-surrogate policy loss plus weighted value loss (1x1). `mean` is
  /// B x d, `log_std` 1 x d, `value` B x 1.
  Var ppo_loss(Var mean, Var log_std, Var value, PpoBatch batch, PpoTerms* terms = nullptr);

  const Mat& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Gradients of the scalar `loss` with respect to every registered parameter.
  Gradients backward(Var loss);
  /// Vector-Jacobian product: gradients of sum(output .* seed).
  Gradients backward(Var output, const Mat& seed);

 private:
  enum class Op {
    constant,
    parameter,
    affine,
    activation,
    segment_softmax,
    segment_weighted_sum,
    concat_cols,
    sum,
    dot,
    ppo_loss,
  };

  struct Node {
    Op op = Op::constant;
    std::vector<std::size_t> inputs;
    Mat value;
    Mat grad;
    bool needs_grad = false;
    const Mat* param = nullptr;
    Activation activation = Activation::identity;
    double slope = 0.0;
    std::vector<std::size_t> offsets;
    Mat coeffs;
    std::shared_ptr<const PpoBatch> ppo;
  };

  std::size_t check(Var v) const;
  Var push(Node node);
  void backward_node(Node& node);

  std::uint64_t id_;
  std::vector<Node> nodes_;
};

}  // namespace perminv
