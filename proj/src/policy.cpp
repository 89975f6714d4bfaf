#include "perminv/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace perminv {

namespace {

MlpSpec trunk_spec(const PolicySpec& spec, std::size_t out) {
  MlpSpec m;
  m.widths.push_back(spec.input_dim);
  m.widths.insert(m.widths.end(), spec.hidden.begin(), spec.hidden.end());
  m.widths.push_back(out);
  m.activation = Activation::leaky_relu;
  m.slope = spec.slope;
  return m;
}

void check_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("policy: non-finite representation");
  }
}

}  // namespace

GaussianPolicy::GaussianPolicy(PolicySpec spec, std::uint64_t seed)
    : spec_(std::move(spec)),
      actor_(trunk_spec(spec_, spec_.action_dim), derive_seed(seed, "actor")),
      critic_(trunk_spec(spec_, 1), derive_seed(seed, "critic")),
      log_std_(1, spec_.action_dim, spec_.log_std_init) {}

GaussianOutput GaussianPolicy::forward(std::span<const double> representation) const {
  check_finite(representation);
  const Mat mean = actor_.forward(Mat::row(representation));
  GaussianOutput out;
  out.mean.assign(mean.data().begin(), mean.data().end());
  out.std.resize(spec_.action_dim);
  for (std::size_t d = 0; d < spec_.action_dim; ++d) {
    out.std[d] = std::exp(std::clamp(log_std_(0, d), spec_.log_std_min, spec_.log_std_max));
  }
  return out;
}

double GaussianPolicy::value(std::span<const double> representation) const {
  check_finite(representation);
  return critic_.forward(Mat::row(representation))(0, 0);
}

std::vector<Mat*> GaussianPolicy::parameters() {
  auto out = actor_.parameters();
  out.push_back(&log_std_);
  auto c = critic_.parameters();
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

void GaussianPolicy::clamp_log_std() {
  for (double& v : log_std_.data()) v = std::clamp(v, spec_.log_std_min, spec_.log_std_max);
}

GaussianOutput policy_forward(const GaussianPolicy& policy,
                              std::span<const double> representation) {
  return policy.forward(representation);
}

double gaussian_log_prob(std::span<const double> action, std::span<const double> mean,
                         std::span<const double> std) {
  if (action.size() != mean.size() || std.size() != mean.size()) {
    throw std::invalid_argument("gaussian_log_prob: dimension mismatch");
  }
  double lp = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double z = (action[d] - mean[d]) / std[d];
    lp += -0.5 * z * z - std::log(std[d]);
  }
  return lp - 0.5 * static_cast<double>(mean.size()) * std::log(2.0 * std::numbers::pi);
}

ActionSample sample_action(std::span<const double> mean, std::span<const double> std, Rng& rng) {
  if (std.size() != mean.size()) throw std::invalid_argument("sample_action: dimension mismatch");
  std::normal_distribution<double> normal(0.0, 1.0);
  ActionSample s;
  s.action.resize(mean.size());
  for (std::size_t d = 0; d < mean.size(); ++d) s.action[d] = mean[d] + std[d] * normal(rng);
  s.log_prob = gaussian_log_prob(s.action, mean, std);
  return s;
}

}  // namespace perminv
