#pragma once

#include <cstdint>
#include <vector>

#include "perminv/mat.hpp"
#include "perminv/rng.hpp"
#include "perminv/tape.hpp"

namespace perminv {

/// Layer widths include the input width: {in, h1, ..., out}. The activation
/// applies after every hidden layer; the output layer is linear.
struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation activation = Activation::relu;
  double slope = 0.01;

  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }
  /// Throws std::invalid_argument unless there is at least one layer and
  /// every width is positive.
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network.
  explicit Mlp(MlpSpec spec);
  /// He-style init: weights uniform in [-1, 1] * sqrt(2 / fan_in), zero biases.
  Mlp(MlpSpec spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }

  Mat& weight(std::size_t layer) { return weights_.at(layer); }
  const Mat& weight(std::size_t layer) const { return weights_.at(layer); }
  Mat& bias(std::size_t layer) { return biases_.at(layer); }
  const Mat& bias(std::size_t layer) const { return biases_.at(layer); }

  /// Weights and biases interleaved in layer order.
  std::vector<Mat*> parameters();
  std::vector<const Mat*> parameters() const;
  std::size_t parameter_count() const;

  Mat forward(const Mat& x) const;
  Var forward(Tape& tape, Var x) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  MlpSpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<Mat> weights_;
  std::vector<Mat> biases_;
};

Mat mlp_forward(const Mlp& net, const Mat& x);
Var mlp_forward(const Mlp& net, Tape& tape, Var x);

}  // namespace perminv
