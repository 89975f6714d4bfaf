#include "perminv/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace perminv {

void MlpSpec::validate() const {
  if (widths.size() < 2) {
    throw std::invalid_argument("MlpSpec: need at least one layer (two widths)");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw std::invalid_argument("MlpSpec: widths must be >= 1");
  }
  if (activation == Activation::leaky_relu && !(slope > 0.0 && slope < 1.0)) {
    throw std::invalid_argument("MlpSpec: leaky_relu slope must lie in (0, 1)");
  }
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    weights_.emplace_back(spec_.widths[l], spec_.widths[l + 1]);
    biases_.emplace_back(1, spec_.widths[l + 1]);
  }
}

Mlp::Mlp(MlpSpec spec, std::uint64_t seed) : Mlp(std::move(spec)) {
  seed_ = seed;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (Mat& w : weights_) {
    const double scale = std::sqrt(2.0 / static_cast<double>(w.rows()));
    for (double& v : w.data()) v = unit(rng) * scale;
  }
}

std::vector<Mat*> Mlp::parameters() {
  std::vector<Mat*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Mat*> Mlp::parameters() const {
  std::vector<const Mat*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Mat* p : parameters()) n += p->size();
  return n;
}

Mat Mlp::forward(const Mat& x) const {
  if (x.cols() != spec_.input_dim()) {
    throw ShapeError("mlp: input " + shape_string(x) + " but network expects " +
                     std::to_string(spec_.input_dim()) + " columns");
  }
  Mat h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = affine_forward(h, weights_[l], biases_[l]);
    if (l + 1 < weights_.size()) h = activation_forward(h, spec_.activation, spec_.slope);
  }
  return h;
}

Var Mlp::forward(Tape& tape, Var x) const {
  if (tape.value(x).cols() != spec_.input_dim()) {
    throw ShapeError("mlp: input " + shape_string(tape.value(x)) + " but network expects " +
                     std::to_string(spec_.input_dim()) + " columns");
  }
  Var h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = tape.affine(h, tape.parameter(weights_[l]), tape.parameter(biases_[l]));
    if (l + 1 < weights_.size()) h = tape.activation(h, spec_.activation, spec_.slope);
  }
  return h;
}

Mat mlp_forward(const Mlp& net, const Mat& x) { return net.forward(x); }
Var mlp_forward(const Mlp& net, Tape& tape, Var x) { return net.forward(tape, x); }

}  // namespace perminv
