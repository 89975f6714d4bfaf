#include "perminv/scavenger.hpp"

#include <stdexcept>

namespace perminv {

namespace {

std::size_t nearest(const std::vector<Vec2>& points, Vec2 from) {
  std::size_t best = 0;
  double best_dist = distance(points[0], from);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d = distance(points[i], from);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

bool any_within(const std::vector<Vec2>& points, Vec2 at, double radius) {
  for (Vec2 p : points) {
    if (distance(p, at) <= radius) return true;
  }
  return false;
}

Mat offsets_matrix(const std::vector<Vec2>& offsets) {
  Mat m(offsets.size(), 2);
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    m(i, 0) = offsets[i].x;
    m(i, 1) = offsets[i].y;
  }
  return m;
}

}  // namespace

std::vector<Vec2> ScavengerState::food_offsets() const {
  std::vector<Vec2> out;
  out.reserve(food.size());
  for (Vec2 f : food) out.push_back(f - ego);
  return out;
}

std::vector<Vec2> ScavengerState::poison_offsets() const {
  std::vector<Vec2> out;
  out.reserve(poison.size());
  for (Vec2 p : poison) out.push_back(p - ego);
  return out;
}

std::vector<double> ScavengerState::vector() const {
  std::vector<double> out;
  out.reserve(2 * (food.size() + poison.size()) + 2);
  for (Vec2 f : food_offsets()) {
    out.push_back(f.x);
    out.push_back(f.y);
  }
  for (Vec2 p : poison_offsets()) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
  out.push_back(ego.x);
  out.push_back(ego.y);
  return out;
}

ScavengerState scavenger_reset(int task, std::size_t m, std::uint64_t seed,
                               const ScavengerConfig& config) {
  if (task != 1 && task != 2) throw std::invalid_argument("scavenger: task must be 1 or 2");
  if (m == 0) throw std::invalid_argument("scavenger: need at least one food particle");
  Rng rng(seed);
  std::uniform_real_distribution<double> coord(-config.world_half_width,
                                               config.world_half_width);
  ScavengerState s;
  s.task = task;
  s.ego = {0.0, 0.0};
  for (std::size_t i = 0; i < m; ++i) {
    const double x = coord(rng);
    const double y = coord(rng);
    s.food.push_back({x, y});
  }
  if (task == 2) {
    for (std::size_t i = 0; i < m; ++i) {
      const double x = coord(rng);
      const double y = coord(rng);
      s.poison.push_back({x, y});
    }
  }
  return s;
}

StepResult<ScavengerState> scavenger_step(const ScavengerState& state, Vec2 action,
                                          const ScavengerConfig& config) {
  if (state.terminal) throw std::logic_error("scavenger: step on a terminal state");
  if (!std::isfinite(action.x) || !std::isfinite(action.y)) {
    throw std::invalid_argument("scavenger: non-finite action");
  }
  StepResult<ScavengerState> r;
  r.state = state;
  ScavengerState& s = r.state;
  s.ego = s.ego + config.delta * clip_norm(action, config.max_speed);
  s.steps += 1;

  if (any_within(s.poison, s.ego, config.capture_radius)) {
    r.reward = config.poison_reward;
    r.done = true;
    r.info.reached_poison = true;
  } else if (any_within(s.food, s.ego, config.capture_radius)) {
    r.reward = config.food_reward;
    r.done = true;
    r.info.reached_food = true;
  } else {
    r.reward = config.step_reward;
    if (s.steps >= config.step_limit) {
      r.done = true;
      r.info.timeout = true;
    }
  }
  s.terminal = r.done;
  return r;
}

Vec2 greedy_policy(const ScavengerState& state, const ScavengerConfig& config) {
  if (state.food.empty()) throw std::invalid_argument("greedy_policy: no food");
  const Vec2 offset = state.food[nearest(state.food, state.ego)] - state.ego;
  const double reach = config.delta * config.max_speed;
  const double d = offset.norm();
  if (d <= reach) return (1.0 / config.delta) * offset;
  return (config.max_speed / d) * offset;
}

ObjectSet to_object_set(const ScavengerState& state) {
  ObjectSet set;
  set.classes.push_back(offsets_matrix(state.food_offsets()));
  if (state.task == 2) set.classes.push_back(offsets_matrix(state.poison_offsets()));
  set.ego = {state.ego.x, state.ego.y};
  return set;
}

std::vector<double> to_flat_baseline(const ScavengerState& state) { return state.vector(); }

ScavengerEnv::ScavengerEnv(int task, std::size_t m, std::uint64_t seed, ScavengerConfig config)
    : task_(task), m_(m), config_(config), rng_(seed) {
  reset();
}

EnvDescriptor ScavengerEnv::describe() const {
  EnvDescriptor d;
  d.class_dims = {2};
  d.average_counts = {static_cast<double>(m_)};
  if (task_ == 2) {
    d.class_dims.push_back(2);
    d.average_counts.push_back(static_cast<double>(m_));
  }
  d.ego_dim = 2;
  d.baseline_dim = 2 * m_ * (task_ == 2 ? 2 : 1) + 2;
  d.action_dim = 2;
  d.action_scale = config_.max_speed;
  return d;
}

void ScavengerEnv::reset() { state_ = scavenger_reset(task_, m_, rng_(), config_); }

Transition ScavengerEnv::step(std::span<const double> action) {
  if (action.size() != 2) throw std::invalid_argument("scavenger: action must be 2-D");
  auto r = scavenger_step(state_, {action[0], action[1]}, config_);
  state_ = std::move(r.state);
  return {r.reward, r.done, r.info};
}

std::vector<double> ScavengerEnv::greedy_action() const {
  const Vec2 a = greedy_policy(state_, config_);
  return {a.x, a.y};
}

}  // namespace perminv
