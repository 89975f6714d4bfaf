#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "perminv/mat.hpp"
#include "perminv/rng.hpp"
#include "perminv/set_encoder.hpp"
#include "perminv/tape.hpp"

namespace perminv::testing {

inline Mat random_mat(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

inline std::vector<double> random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

/// Rows of `m` reordered so that row i of the result is row perm[i] of `m`.
inline Mat permute_rows(const Mat& m, const std::vector<std::size_t>& perm) {
  Mat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy(m.row_span(perm[i]).begin(), m.row_span(perm[i]).end(), out.row_span(i).begin());
  }
  return out;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

inline ObjectSet random_object_set(const EncoderSpec& spec, const std::vector<std::size_t>& counts,
                                   Rng& rng) {
  ObjectSet s;
  for (std::size_t j = 0; j < spec.classes.size(); ++j) {
    s.classes.push_back(random_mat(counts[j], spec.classes[j].input_dim, rng));
  }
  s.ego = random_vec(spec.ego_dim, rng);
  return s;
}

/// Relative error with a floor on the denominator. Central differences carry
/// ~1e-10 of rounding noise, so exact-zero gradients must not divide by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Adds U(-scale, scale) to every entry. Zero-initialized biases put a fully
/// dead ReLU layer's successors exactly on a kink, where differences are invalid.
inline void jitter(const std::vector<Mat*>& params, Rng& rng, double scale = 0.1) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Mat* p : params) {
    for (double& v : p->data()) v += u(rng);
  }
}

/// Worst relative error between tape gradients and central differences of
/// `loss` over every entry of every parameter in `params`.
inline double max_gradient_error(const std::vector<Mat*>& params,
                                 const std::function<double()>& loss, const Gradients& grads,
                                 double step = 1e-5) {
  double worst = 0.0;
  for (Mat* p : params) {
    const Mat g = grads.get(*p);
    for (std::size_t i = 0; i < p->size(); ++i) {
      double& x = p->data()[i];
      const double saved = x;
      x = saved + step;
      const double up = loss();
      x = saved - step;
      const double down = loss();
      x = saved;
      worst = std::max(worst, relative_error(g.data()[i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

}  // namespace perminv::testing
