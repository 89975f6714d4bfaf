#pragma once

#include <vector>

#include "perminv/mat.hpp"
#include "perminv/tape.hpp"

namespace perminv {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer over a fixed list of parameter matrices.
class Adam {
 public:
  Adam(std::vector<Mat*> params, AdamConfig config);

  void step(const Gradients& grads);
  long steps() const { return t_; }

 private:
  std::vector<Mat*> params_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  AdamConfig config_;
  long t_ = 0;
};

}  // namespace perminv
