#include <doctest.h>

#include <cmath>

#include "perminv/policy.hpp"
#include "perminv/tape.hpp"
#include "support.hpp"

using namespace perminv;
using namespace perminv::testing;

namespace {

// log N(a; mean, exp(log_std)) summed over the row; the oracle for ppo_loss.
double row_log_prob(const Mat& a, const Mat& mean, const Mat& log_std, std::size_t r) {
  double lp = 0.0;
  for (std::size_t d = 0; d < a.cols(); ++d) {
    const double s = std::exp(log_std(0, d));
    const double z = (a(r, d) - mean(r, d)) / s;
    lp += -0.5 * z * z - log_std(0, d) - 0.5 * std::log(2.0 * M_PI);
  }
  return lp;
}

PpoBatch make_batch(std::size_t rows, std::size_t dims, Rng& rng) {
  PpoBatch b;
  b.actions = random_mat(rows, dims, rng);
  b.old_log_probs = random_vec(rows, rng, 0.3);
  for (double& v : b.old_log_probs) v -= 1.5;
  b.advantages = random_vec(rows, rng);
  b.returns = random_vec(rows, rng);
  return b;
}

}  // namespace

TEST_CASE("each primitive matches central differences") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Mat x = random_mat(5, 3, rng), w = random_mat(3, 4, rng), b = random_mat(1, 4, rng);
    Mat w2 = random_mat(4, 1, rng), b2 = random_mat(1, 1, rng);
    Mat coeff = random_mat(2, 4, rng);
    const std::vector<std::size_t> offsets{0, 2, 5};
    auto build = [&](Tape& t) {
      const Var xv = t.parameter(x);
      const Var h = t.activation(t.affine(xv, t.parameter(w), t.parameter(b)),
                                 Activation::leaky_relu, 0.1);
      const Var scores = t.affine(h, t.parameter(w2), t.parameter(b2));
      const Var weights = t.segment_softmax(scores, offsets);
      const Var pooled = t.segment_weighted_sum(h, weights, offsets);
      const Var wide = t.concat_cols({pooled, t.constant(Mat(2, 1, 0.7))});
      return t.sum(t.concat_cols(
          {t.sum(t.activation(pooled, Activation::relu)), t.dot(pooled, coeff), t.sum(wide)}));
    };
    auto loss = [&] {
      Tape t;
      return t.value(build(t))(0, 0);
    };
    Tape t;
    const Gradients g = t.backward(build(t));
    CHECK(max_gradient_error({&x, &w, &b, &w2, &b2}, loss, g) < 1e-5);
  }
}

TEST_CASE("concat and sum route gradients to every part") {
  Mat a{{1.0, 2.0}}, b{{3.0}};
  Tape t;
  const Var out = t.sum(t.concat_cols({t.parameter(a), t.parameter(b)}));
  CHECK(t.value(out)(0, 0) == 6.0);
  const Gradients g = t.backward(out);
  CHECK(g.get(a) == Mat{{1.0, 1.0}});
  CHECK(g.get(b) == Mat{{1.0}});
}

TEST_CASE("empty segments pool to zero and take no gradient") {
  Mat z{{1.0, 2.0}, {3.0, 4.0}};
  Mat s{{0.3}, {-0.2}};
  Tape t;
  const std::vector<std::size_t> offsets{0, 0, 2};
  const Var w = t.segment_softmax(t.parameter(s), offsets);
  const Var pooled = t.segment_weighted_sum(t.parameter(z), w, offsets);
  CHECK(t.value(pooled).row_span(0)[0] == 0.0);
  CHECK(t.value(pooled).row_span(0)[1] == 0.0);
  const Gradients g = t.backward(t.sum(pooled));
  CHECK(g.get(z).all_finite());
}

TEST_CASE("tape misuse is rejected") {
  Tape a, b;
  const Var v = a.constant(Mat(1, 1, 2.0));
  CHECK_THROWS_AS(b.sum(v), std::invalid_argument);
  CHECK_THROWS_AS(a.backward(a.constant(Mat(1, 2))), ShapeError);
  CHECK_THROWS_AS(a.segment_softmax(a.constant(Mat(3, 1)), {0, 2}), ShapeError);
  CHECK_THROWS_AS(a.dot(v, Mat(2, 1)), ShapeError);
}

TEST_CASE("constants receive no gradient entry") {
  Mat p{{2.0}};
  Tape t;
  const Var out = t.dot(t.concat_cols({t.parameter(p), t.constant(Mat(1, 1, 5.0))}),
                        Mat{{3.0, 4.0}});
  const Gradients g = t.backward(out);
  CHECK(g.size() == 1);
  CHECK(g.get(p)(0, 0) == 3.0);
}

TEST_CASE("ppo loss matches a direct evaluation") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + rng() % 6, dims = 1 + rng() % 3;
    const Mat mean = random_mat(rows, dims, rng), value = random_mat(rows, 1, rng);
    const Mat log_std = random_mat(1, dims, rng, 0.5);
    PpoBatch batch = make_batch(rows, dims, rng);
    double policy = 0.0, vloss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double ratio = std::exp(row_log_prob(batch.actions, mean, log_std, r) -
                                    batch.old_log_probs[r]);
      const double a = batch.advantages[r];
      const double clipped = std::clamp(ratio, 1.0 - batch.clip, 1.0 + batch.clip);
      policy -= std::min(ratio * a, clipped * a);
      vloss += (value(r, 0) - batch.returns[r]) * (value(r, 0) - batch.returns[r]);
    }
    policy /= static_cast<double>(rows);
    vloss /= static_cast<double>(rows);
    Tape t;
    PpoTerms terms;
    const Var loss = t.ppo_loss(t.constant(mean), t.constant(log_std), t.constant(value), batch,
                                &terms);
    CHECK(terms.policy_loss == doctest::Approx(policy).epsilon(1e-12));
    CHECK(terms.value_loss == doctest::Approx(vloss).epsilon(1e-12));
    CHECK(t.value(loss)(0, 0) == doctest::Approx(policy + 0.5 * vloss).epsilon(1e-12));
  }
}

TEST_CASE("ppo loss clip examples") {
  // One row, one action dim: logp_new is fixed, old log-prob sets the ratio.
  const Mat mean{{0.0}}, log_std{{0.0}}, value{{0.0}};
  auto policy_term = [&](double ratio, double advantage) {
    PpoBatch b;
    b.actions = Mat{{0.0}};
    b.old_log_probs = {-0.5 * std::log(2.0 * M_PI) - std::log(ratio)};
    b.advantages = {advantage};
    b.returns = {0.0};
    Tape t;
    PpoTerms terms;
    t.ppo_loss(t.constant(mean), t.constant(log_std), t.constant(value), b, &terms);
    return -terms.policy_loss;
  };
  CHECK(policy_term(1.2, 1.0) == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(policy_term(0.5, -1.0) == doctest::Approx(-0.9).epsilon(1e-12));
  CHECK(policy_term(1.0, 0.7) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("with unit ratio the policy term is minus the mean advantage") {
  Rng rng(8);
  const Mat mean = random_mat(6, 2, rng), log_std = random_mat(1, 2, rng, 0.3);
  PpoBatch b = make_batch(6, 2, rng);
  double mean_adv = 0.0;
  for (std::size_t r = 0; r < 6; ++r) {
    b.old_log_probs[r] = row_log_prob(b.actions, mean, log_std, r);
    mean_adv += b.advantages[r] / 6.0;
  }
  Tape t;
  PpoTerms terms;
  t.ppo_loss(t.constant(mean), t.constant(log_std), t.constant(Mat(6, 1)), b, &terms);
  CHECK(terms.policy_loss == doctest::Approx(-mean_adv).epsilon(1e-12));
  CHECK(terms.clip_fraction == 0.0);
}

TEST_CASE("ppo loss gradients match central differences") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 2 + rng() % 5, dims = 1 + rng() % 2;
    Mat mean = random_mat(rows, dims, rng), value = random_mat(rows, 1, rng);
    Mat log_std = random_mat(1, dims, rng, 0.5);
    PpoBatch batch = make_batch(rows, dims, rng);
    batch.entropy_coef = 0.01 * static_cast<double>(trial % 2);
    auto build = [&](Tape& t) {
      return t.ppo_loss(t.parameter(mean), t.parameter(log_std), t.parameter(value), batch);
    };
    auto loss = [&] {
      Tape t;
      return t.value(build(t))(0, 0);
    };
    Tape t;
    const Gradients g = t.backward(build(t));
    CHECK(max_gradient_error({&mean, &log_std, &value}, loss, g) < 1e-5);
  }
}

TEST_CASE("non-finite ratio is rejected with diagnostics") {
  PpoBatch b;
  b.actions = Mat{{0.0}};
  b.old_log_probs = {-2000.0};
  b.advantages = {1.0};
  b.returns = {0.0};
  Tape t;
  CHECK_THROWS_AS(t.ppo_loss(t.constant(Mat{{0.0}}), t.constant(Mat{{0.0}}),
                             t.constant(Mat{{0.0}}), b),
                  std::runtime_error);
}

TEST_CASE("vector-Jacobian product through backward with a seed") {
  Mat w{{1.0, 2.0}, {3.0, 4.0}};
  const Mat x{{1.0, -1.0}};
  Tape t;
  const Var y = t.affine(t.constant(x), t.parameter(w), t.constant(Mat(1, 2)));
  const Gradients g = t.backward(y, Mat{{1.0, 10.0}});
  // d(y . seed)/dW = x^T seed
  CHECK(g.get(w) == Mat{{1.0, 10.0}, {-1.0, -10.0}});
}
