#include "perminv/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace perminv {

namespace {

std::atomic<std::uint64_t> next_tape_id{1};

void check_offsets(const std::vector<std::size_t>& offsets, std::size_t rows,
                   const char* who) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != rows ||
      !std::is_sorted(offsets.begin(), offsets.end())) {
    throw ShapeError(std::string(who) + ": offsets must run from 0 to " +
                     std::to_string(rows) + " in non-decreasing order");
  }
}

void add_into(Mat& dst, const Mat& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

Mat Gradients::get(const Mat& param) const {
  auto it = grads_.find(&param);
  if (it == grads_.end()) return Mat(param.rows(), param.cols());
  return it->second;
}

const Mat* Gradients::find(const Mat& param) const {
  auto it = grads_.find(&param);
  return it == grads_.end() ? nullptr : &it->second;
}

void Gradients::accumulate(const Mat* param, const Mat& grad) {
  auto [it, inserted] = grads_.try_emplace(param, grad);
  if (!inserted) add_into(it->second, grad);
}

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

std::size_t Tape::check(Var v) const {
  if (v.tape != id_ || v.index >= nodes_.size()) {
    throw std::invalid_argument("Tape: variable was not recorded on this tape");
  }
  return v.index;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{id_, nodes_.size() - 1};
}

const Mat& Tape::value(Var v) const { return nodes_[check(v)].value; }

Var Tape::constant(Mat value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(const Mat& param) {
  Node n;
  n.op = Op::parameter;
  n.value = param;
  n.param = &param;
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::affine(Var x, Var w, Var b) {
  const std::size_t ix = check(x), iw = check(w), ib = check(b);
  Node n;
  n.op = Op::affine;
  n.inputs = {ix, iw, ib};
  n.value = affine_forward(nodes_[ix].value, nodes_[iw].value, nodes_[ib].value);
  n.needs_grad = nodes_[ix].needs_grad || nodes_[iw].needs_grad || nodes_[ib].needs_grad;
  return push(std::move(n));
}

Var Tape::activation(Var x, Activation kind, double slope) {
  const std::size_t ix = check(x);
  Node n;
  n.op = Op::activation;
  n.inputs = {ix};
  n.activation = kind;
  n.slope = slope;
  n.value = activation_forward(nodes_[ix].value, kind, slope);
  n.needs_grad = nodes_[ix].needs_grad;
  return push(std::move(n));
}

Var Tape::segment_softmax(Var scores, std::vector<std::size_t> offsets) {
  const std::size_t is = check(scores);
  const Mat& y = nodes_[is].value;
  if (y.cols() != 1) throw ShapeError("segment_softmax: scores must be a column");
  check_offsets(offsets, y.rows(), "segment_softmax");
  Node n;
  n.op = Op::segment_softmax;
  n.inputs = {is};
  n.value = Mat(y.rows(), 1);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (lo == hi) continue;
    auto w = softmax_column(y.data().subspan(lo, hi - lo));
    std::copy(w.begin(), w.end(), n.value.data().begin() + lo);
  }
  n.offsets = std::move(offsets);
  n.needs_grad = nodes_[is].needs_grad;
  return push(std::move(n));
}

Var Tape::segment_weighted_sum(Var values, Var weights, std::vector<std::size_t> offsets) {
  const std::size_t iz = check(values), iw = check(weights);
  const Mat& z = nodes_[iz].value;
  const Mat& w = nodes_[iw].value;
  if (w.cols() != 1 || w.rows() != z.rows()) {
    throw ShapeError("segment_weighted_sum: weights " + shape_string(w) + " vs values " +
                     shape_string(z));
  }
  check_offsets(offsets, z.rows(), "segment_weighted_sum");
  Node n;
  n.op = Op::segment_weighted_sum;
  n.inputs = {iz, iw};
  n.value = Mat(offsets.size() - 1, z.cols());
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    auto out = n.value.row_span(s);
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
      auto zi = z.row_span(i);
      const double wi = w(i, 0);
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += wi * zi[c];
    }
  }
  n.offsets = std::move(offsets);
  n.needs_grad = nodes_[iz].needs_grad || nodes_[iw].needs_grad;
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Node n;
  n.op = Op::concat_cols;
  std::size_t rows = nodes_[check(parts.front())].value.rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    const std::size_t ip = check(p);
    if (nodes_[ip].value.rows() != rows) {
      throw ShapeError("concat_cols: row counts differ");
    }
    cols += nodes_[ip].value.cols();
    n.inputs.push_back(ip);
    n.needs_grad = n.needs_grad || nodes_[ip].needs_grad;
  }
  n.value = Mat(rows, cols);
  std::size_t at = 0;
  for (std::size_t ip : n.inputs) {
    const Mat& part = nodes_[ip].value;
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = part.row_span(r);
      std::copy(src.begin(), src.end(), n.value.row_span(r).begin() + at);
    }
    at += part.cols();
  }
  return push(std::move(n));
}

Var Tape::sum(Var x) {
  const std::size_t ix = check(x);
  Node n;
  n.op = Op::sum;
  n.inputs = {ix};
  double total = 0.0;
  for (double v : nodes_[ix].value.data()) total += v;
  n.value = Mat(1, 1, total);
  n.needs_grad = nodes_[ix].needs_grad;
  return push(std::move(n));
}

Var Tape::dot(Var x, Mat coeffs) {
  const std::size_t ix = check(x);
  const Mat& xv = nodes_[ix].value;
  if (!xv.same_shape(coeffs)) {
    throw ShapeError("dot: " + shape_string(xv) + " vs " + shape_string(coeffs));
  }
  Node n;
  n.op = Op::dot;
  n.inputs = {ix};
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += xv.data()[i] * coeffs.data()[i];
  n.value = Mat(1, 1, total);
  n.coeffs = std::move(coeffs);
  n.needs_grad = nodes_[ix].needs_grad;
  return push(std::move(n));
}

Var Tape::ppo_loss(Var mean, Var log_std, Var value, PpoBatch batch, PpoTerms* terms) {
  const std::size_t im = check(mean), il = check(log_std), iv = check(value);
  const Mat& mu = nodes_[im].value;
  const Mat& ls = nodes_[il].value;
  const Mat& v = nodes_[iv].value;
  const std::size_t rows = mu.rows(), dim = mu.cols();
  if (rows == 0) throw ShapeError("ppo_loss: empty batch");
  if (ls.rows() != 1 || ls.cols() != dim || v.rows() != rows || v.cols() != 1 ||
      !batch.actions.same_shape(mu) || batch.old_log_probs.size() != rows ||
      batch.advantages.size() != rows || batch.returns.size() != rows) {
    throw ShapeError("ppo_loss: inconsistent batch shapes");
  }

  std::vector<double> log_sigma(dim), inv_var(dim);
  double log_sigma_total = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    log_sigma[d] = std::clamp(ls(0, d), batch.log_std_min, batch.log_std_max);
    inv_var[d] = std::exp(-2.0 * log_sigma[d]);
    log_sigma_total += log_sigma[d];
  }
  const double log_norm = 0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);

  double surrogate = 0.0, value_err = 0.0;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    double quad = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = batch.actions(i, d) - mu(i, d);
      quad += diff * diff * inv_var[d];
    }
    const double log_prob = -0.5 * quad - log_sigma_total - log_norm;
    const double ratio = std::exp(log_prob - batch.old_log_probs[i]);
    if (!std::isfinite(ratio)) {
      std::ostringstream msg;
      msg << "ppo_loss: non-finite probability ratio at row " << i << " (log_prob "
          << log_prob << ", old " << batch.old_log_probs[i] << ")";
      throw std::runtime_error(msg.str());
    }
    const double adv = batch.advantages[i];
    const double bounded = std::clamp(ratio, 1.0 - batch.clip, 1.0 + batch.clip);
    surrogate += std::min(ratio * adv, bounded * adv);
    if (bounded != ratio) ++clipped;
    const double err = v(i, 0) - batch.returns[i];
    value_err += err * err;
  }
  const double n_rows = static_cast<double>(rows);
  const double entropy = log_sigma_total + 0.5 * static_cast<double>(dim) *
                                               (1.0 + std::log(2.0 * std::numbers::pi));
  PpoTerms t;
  t.policy_loss = -surrogate / n_rows;
  t.value_loss = value_err / n_rows;
  t.entropy = entropy;
  t.clip_fraction = static_cast<double>(clipped) / n_rows;
  if (terms != nullptr) *terms = t;

  Node n;
  n.op = Op::ppo_loss;
  n.inputs = {im, il, iv};
  n.value = Mat(1, 1,
                t.policy_loss + batch.value_coef * t.value_loss - batch.entropy_coef * entropy);
  n.ppo = std::make_shared<const PpoBatch>(std::move(batch));
  n.needs_grad = nodes_[im].needs_grad || nodes_[il].needs_grad || nodes_[iv].needs_grad;
  return push(std::move(n));
}

Gradients Tape::backward(Var loss) {
  const std::size_t il = check(loss);
  if (nodes_[il].value.rows() != 1 || nodes_[il].value.cols() != 1) {
    throw ShapeError("backward: loss must be a 1x1 scalar, got " +
                     shape_string(nodes_[il].value));
  }
  return backward(loss, Mat(1, 1, 1.0));
}

Gradients Tape::backward(Var output, const Mat& seed) {
  const std::size_t io = check(output);
  if (!seed.same_shape(nodes_[io].value)) {
    throw ShapeError("backward: seed " + shape_string(seed) + " vs output " +
                     shape_string(nodes_[io].value));
  }
  for (Node& n : nodes_) {
    if (n.needs_grad) {
      n.grad = Mat(n.value.rows(), n.value.cols());
    } else {
      n.grad = Mat();
    }
  }
  Gradients result;
  if (!nodes_[io].needs_grad) return result;
  nodes_[io].grad = seed;
  for (std::size_t k = io + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.needs_grad) continue;
    if (n.op == Op::parameter) {
      result.accumulate(n.param, n.grad);
    } else {
      backward_node(n);
    }
  }
  return result;
}

void Tape::backward_node(Node& n) {
  switch (n.op) {
    case Op::constant:
    case Op::parameter:
      return;
    case Op::affine: {
      Node& x = nodes_[n.inputs[0]];
      Node& w = nodes_[n.inputs[1]];
      Node& b = nodes_[n.inputs[2]];
      if (x.needs_grad) matmul_a_bt_acc(n.grad, w.value, x.grad);
      if (w.needs_grad) matmul_at_b_acc(x.value, n.grad, w.grad);
      if (b.needs_grad) {
        auto bg = b.grad.data();
        for (std::size_t r = 0; r < n.grad.rows(); ++r) {
          auto g = n.grad.row_span(r);
          for (std::size_t c = 0; c < g.size(); ++c) bg[c] += g[c];
        }
      }
      return;
    }
    case Op::activation: {
      Node& x = nodes_[n.inputs[0]];
      auto g = n.grad.data();
      auto xv = x.value.data();
      auto xg = x.grad.data();
      switch (n.activation) {
        case Activation::relu:
          for (std::size_t i = 0; i < g.size(); ++i) xg[i] += xv[i] > 0.0 ? g[i] : 0.0;
          break;
        case Activation::leaky_relu:
          for (std::size_t i = 0; i < g.size(); ++i) {
            xg[i] += xv[i] >= 0.0 ? g[i] : n.slope * g[i];
          }
          break;
        case Activation::identity:
          for (std::size_t i = 0; i < g.size(); ++i) xg[i] += g[i];
          break;
      }
      return;
    }
    case Op::segment_softmax: {
      Node& y = nodes_[n.inputs[0]];
      for (std::size_t s = 0; s + 1 < n.offsets.size(); ++s) {
        const std::size_t lo = n.offsets[s], hi = n.offsets[s + 1];
        double inner = 0.0;
        for (std::size_t i = lo; i < hi; ++i) inner += n.value(i, 0) * n.grad(i, 0);
        for (std::size_t i = lo; i < hi; ++i) {
          y.grad(i, 0) += n.value(i, 0) * (n.grad(i, 0) - inner);
        }
      }
      return;
    }
    case Op::segment_weighted_sum: {
      Node& z = nodes_[n.inputs[0]];
      Node& w = nodes_[n.inputs[1]];
      for (std::size_t s = 0; s + 1 < n.offsets.size(); ++s) {
        auto g = n.grad.row_span(s);
        for (std::size_t i = n.offsets[s]; i < n.offsets[s + 1]; ++i) {
          if (z.needs_grad) {
            auto zg = z.grad.row_span(i);
            const double wi = w.value(i, 0);
            for (std::size_t c = 0; c < g.size(); ++c) zg[c] += wi * g[c];
          }
          if (w.needs_grad) {
            auto zi = z.value.row_span(i);
            double acc = 0.0;
            for (std::size_t c = 0; c < g.size(); ++c) acc += zi[c] * g[c];
            w.grad(i, 0) += acc;
          }
        }
      }
      return;
    }
    case Op::concat_cols: {
      std::size_t at = 0;
      for (std::size_t ip : n.inputs) {
        Node& part = nodes_[ip];
        const std::size_t width = part.value.cols();
        if (part.needs_grad) {
          for (std::size_t r = 0; r < n.grad.rows(); ++r) {
            auto src = n.grad.row_span(r).subspan(at, width);
            auto dst = part.grad.row_span(r);
            for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
          }
        }
        at += width;
      }
      return;
    }
    case Op::sum: {
      Node& x = nodes_[n.inputs[0]];
      const double g = n.grad(0, 0);
      for (double& v : x.grad.data()) v += g;
      return;
    }
    case Op::dot: {
      Node& x = nodes_[n.inputs[0]];
      const double g = n.grad(0, 0);
      auto xg = x.grad.data();
      auto c = n.coeffs.data();
      for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += g * c[i];
      return;
    }
    case Op::ppo_loss: {
      Node& mu_node = nodes_[n.inputs[0]];
      Node& ls_node = nodes_[n.inputs[1]];
      Node& v_node = nodes_[n.inputs[2]];
      const PpoBatch& batch = *n.ppo;
      const Mat& mu = mu_node.value;
      const std::size_t rows = mu.rows(), dim = mu.cols();
      const double upstream = n.grad(0, 0);
      const double n_rows = static_cast<double>(rows);

      std::vector<double> log_sigma(dim), inv_var(dim), ls_grad(dim, 0.0);
      double log_sigma_total = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        log_sigma[d] = std::clamp(ls_node.value(0, d), batch.log_std_min, batch.log_std_max);
        inv_var[d] = std::exp(-2.0 * log_sigma[d]);
        log_sigma_total += log_sigma[d];
      }
      const double log_norm =
          0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);

      for (std::size_t i = 0; i < rows; ++i) {
        double quad = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = batch.actions(i, d) - mu(i, d);
          quad += diff * diff * inv_var[d];
        }
        const double log_prob = -0.5 * quad - log_sigma_total - log_norm;
        const double ratio = std::exp(log_prob - batch.old_log_probs[i]);
        const double adv = batch.advantages[i];
        const double bounded = std::clamp(ratio, 1.0 - batch.clip, 1.0 + batch.clip);
        const double d_surr = ratio * adv <= bounded * adv ? adv : 0.0;
        const double d_logp = -upstream * d_surr * ratio / n_rows;
        if (d_logp != 0.0) {
          for (std::size_t d = 0; d < dim; ++d) {
            const double diff = batch.actions(i, d) - mu(i, d);
            if (mu_node.needs_grad) mu_node.grad(i, d) += d_logp * diff * inv_var[d];
            ls_grad[d] += d_logp * (diff * diff * inv_var[d] - 1.0);
          }
        }
        if (v_node.needs_grad) {
          v_node.grad(i, 0) += upstream * batch.value_coef * 2.0 *
                               (v_node.value(i, 0) - batch.returns[i]) / n_rows;
        }
      }
      if (ls_node.needs_grad) {
        for (std::size_t d = 0; d < dim; ++d) {
          const double raw = ls_node.value(0, d);
          if (raw < batch.log_std_min || raw > batch.log_std_max) continue;
          ls_node.grad(0, d) += ls_grad[d] - upstream * batch.entropy_coef;
        }
      }
      return;
    }
  }
}

}  // namespace perminv
