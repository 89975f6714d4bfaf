#include "perminv/adam.hpp"

#include <cmath>

namespace perminv {

Adam::Adam(std::vector<Mat*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const Mat* p : params_) {
    m_.emplace_back(p->rows(), p->cols());
    v_.emplace_back(p->rows(), p->cols());
  }
}

void Adam::step(const Gradients& grads) {
  ++t_;
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Mat* g = grads.find(*params_[i]);
    if (g == nullptr) continue;
    auto p = params_[i]->data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    auto gd = g->data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * gd[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * gd[k] * gd[k];
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      p[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace perminv
