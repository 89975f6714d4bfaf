#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "perminv/mlp.hpp"
#include "perminv/rng.hpp"

namespace perminv {

struct PolicySpec {
  std::size_t input_dim = 1;
  std::size_t action_dim = 2;
  std::vector<std::size_t> hidden{64, 64, 64, 64};
  double slope = 0.01;
  double log_std_init = -0.5;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
};

struct GaussianOutput {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Diagonal-Gaussian actor (leaky-ReLU trunk with a linear mean head and
/// free log-std parameters) plus a separate critic of the same trunk shape.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(PolicySpec spec, std::uint64_t seed);

  const PolicySpec& spec() const { return spec_; }

  Mlp& actor() { return actor_; }
  const Mlp& actor() const { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& critic() const { return critic_; }
  Mat& log_std() { return log_std_; }
  const Mat& log_std() const { return log_std_; }

  /// Throws std::invalid_argument for non-finite representations.
  GaussianOutput forward(std::span<const double> representation) const;
  double value(std::span<const double> representation) const;

  std::vector<Mat*> parameters();
  /// Keeps log-std within its clamp range after an update.
  void clamp_log_std();

 private:
  PolicySpec spec_;
  Mlp actor_;
  Mlp critic_;
  Mat log_std_;
};

GaussianOutput policy_forward(const GaussianPolicy& policy, std::span<const double> representation);

double gaussian_log_prob(std::span<const double> action, std::span<const double> mean,
                         std::span<const double> std);

struct ActionSample {
  std::vector<double> action;
  double log_prob = 0.0;
};

ActionSample sample_action(std::span<const double> mean, std::span<const double> std, Rng& rng);

}  // namespace perminv
