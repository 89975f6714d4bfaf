#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace perminv {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// GAE-lambda by the backward recursion
///   delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
///   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
/// with V_T = `bootstrap`. Returns are A + V.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap, double gamma,
                      double lambda);

/// Shifts and scales to zero mean, unit variance. Leaves constant input centred only.
void normalize_advantages(std::vector<double>& advantages);

}  // namespace perminv
