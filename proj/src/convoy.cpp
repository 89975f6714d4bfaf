#include "perminv/convoy.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace perminv {

namespace {

Vec2 move_toward(Vec2 from, Vec2 to, double step) {
  const Vec2 d = to - from;
  const double len = d.norm();
  if (len <= step) return to;
  return from + (step / len) * d;
}

// Index of the live member nearest `p`, or npos when none are alive.
std::size_t nearest_member(const ConvoyState& s, Vec2 p) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.members.size(); ++i) {
    if (!s.members[i].active) continue;
    const double d = distance(s.members[i].pos, p);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace

std::size_t ConvoyState::active_attackers() const {
  return static_cast<std::size_t>(
      std::count_if(attackers.begin(), attackers.end(), [](const Entity& e) { return e.active; }));
}

std::size_t ConvoyState::active_members() const {
  return static_cast<std::size_t>(
      std::count_if(members.begin(), members.end(), [](const Entity& e) { return e.active; }));
}

std::vector<Vec2> convoy_spawn_points(const ConvoyConfig& config) {
  // Walk the perimeter (length 4) starting half a spacing in from (0, 0).
  std::vector<Vec2> points;
  const double spacing = 4.0 / static_cast<double>(config.spawn_points);
  for (std::size_t i = 0; i < config.spawn_points; ++i) {
    const double t = spacing * (static_cast<double>(i) + 0.5);
    if (t < 1.0) {
      points.push_back({t, 0.0});
    } else if (t < 2.0) {
      points.push_back({1.0, t - 1.0});
    } else if (t < 3.0) {
      points.push_back({3.0 - t, 1.0});
    } else {
      points.push_back({0.0, 4.0 - t});
    }
  }
  return points;
}

ConvoyState convoy_reset(std::uint64_t seed, const ConvoyConfig& config) {
  ConvoyState s;
  s.rng = Rng(seed);
  const double mid = 0.5;
  const double first = mid - 0.5 * config.member_spacing * static_cast<double>(config.members - 1);
  for (std::size_t i = 0; i < config.members; ++i) {
    s.members.push_back({{0.0, first + config.member_spacing * static_cast<double>(i)}, true});
  }
  s.defender = config.defender_start;
  return s;
}

StepResult<ConvoyState> convoy_step(const ConvoyState& state, Vec2 action,
                                    const ConvoyConfig& config) {
  if (state.terminal) throw std::logic_error("convoy: step on a terminal state");
  if (!std::isfinite(action.x) || !std::isfinite(action.y)) {
    throw std::invalid_argument("convoy: non-finite action");
  }
  StepResult<ConvoyState> r;
  r.state = state;
  ConvoyState& s = r.state;

  const Vec2 move = clip_norm(action, config.defender_max_step);
  s.defender = s.defender + move;
  if (move.norm() > 0.0) s.heading = std::atan2(move.y, move.x);

  for (Entity& m : s.members) {
    if (!m.active) continue;
    m.pos.x += config.convoy_speed;
    if (m.pos.x >= config.goal_x) m.active = false;  // arrived
  }

  for (Entity& a : s.attackers) {
    if (!a.active) continue;
    const std::size_t target = nearest_member(s, a.pos);
    if (target == std::numeric_limits<std::size_t>::max()) break;
    a.pos = move_toward(a.pos, s.members[target].pos, config.attacker_speed);
  }

  for (Entity& a : s.attackers) {
    if (a.active && distance(a.pos, s.defender) <= config.block_radius) {
      a.active = false;
      r.info.blocked += 1;
    }
  }
  for (Entity& a : s.attackers) {
    if (!a.active) continue;
    for (Entity& m : s.members) {
      if (m.active && distance(a.pos, m.pos) <= config.attack_radius) {
        m.active = false;
        a.active = false;
        r.info.members_lost += 1;
        break;
      }
    }
  }
  r.reward = config.block_reward * r.info.blocked + config.loss_reward * r.info.members_lost;

  s.time += 1;
  if (s.active_members() > 0) {
    std::bernoulli_distribution spawn(config.spawn_probability);
    for (Vec2 point : convoy_spawn_points(config)) {
      if (!spawn(s.rng) || s.active_attackers() >= config.max_attackers) continue;
      auto slot = std::find_if(s.attackers.begin(), s.attackers.end(),
                               [](const Entity& e) { return !e.active; });
      if (slot == s.attackers.end()) {
        s.attackers.push_back({point, true});
      } else {
        *slot = {point, true};
      }
    }
  }

  if (s.active_members() == 0) {
    r.done = true;
    r.info.convoy_finished = true;
  } else if (s.time >= config.step_limit) {
    r.done = true;
    r.info.timeout = true;
  }
  s.terminal = r.done;
  return r;
}

Vec2 convoy_greedy_policy(const ConvoyState& state, const ConvoyConfig& config) {
  const Entity* threat = nullptr;
  double threat_dist = std::numeric_limits<double>::infinity();
  for (const Entity& a : state.attackers) {
    if (!a.active) continue;
    const std::size_t m = nearest_member(state, a.pos);
    if (m == std::numeric_limits<std::size_t>::max()) continue;
    const double d = distance(a.pos, state.members[m].pos);
    if (d < threat_dist) {
      threat = &a;
      threat_dist = d;
    }
  }
  if (threat == nullptr) return {0.0, 0.0};
  return clip_norm(threat->pos - state.defender, config.defender_max_step);
}

ObjectSet to_object_set(const ConvoyState& state) {
  auto live = [](const std::vector<Entity>& es) {
    std::size_t n = 0;
    for (const Entity& e : es) n += e.active ? 1 : 0;
    Mat m(n, 2);
    std::size_t r = 0;
    for (const Entity& e : es) {
      if (!e.active) continue;
      m(r, 0) = e.pos.x;
      m(r, 1) = e.pos.y;
      ++r;
    }
    return m;
  };
  ObjectSet set;
  set.classes.push_back(live(state.members));
  set.classes.push_back(live(state.attackers));
  set.ego = {state.defender.x, state.defender.y, state.heading};
  return set;
}

std::vector<double> to_flat_baseline(const ConvoyState& state, std::size_t max_attackers) {
  if (state.attackers.size() > max_attackers) {
    throw std::length_error("convoy baseline: " + std::to_string(state.attackers.size()) +
                            " attacker slots exceed the maximum of " +
                            std::to_string(max_attackers));
  }
  std::vector<double> out;
  out.reserve(3 * (state.members.size() + max_attackers) + 3);
  auto put = [&out](const Entity& e) {
    if (e.active) {
      out.insert(out.end(), {e.pos.x, e.pos.y, 1.0});
    } else {
      out.insert(out.end(), {0.0, 0.0, 0.0});
    }
  };
  for (const Entity& m : state.members) put(m);
  for (const Entity& a : state.attackers) put(a);
  out.resize(out.size() + 3 * (max_attackers - state.attackers.size()), 0.0);
  out.insert(out.end(), {state.defender.x, state.defender.y, state.heading});
  return out;
}

ConvoyEnv::ConvoyEnv(std::uint64_t seed, ConvoyConfig config)
    : config_(config), rng_(seed) {
  reset();
}

EnvDescriptor ConvoyEnv::describe() const {
  EnvDescriptor d;
  d.class_dims = {2, 2};
  // Typical live populations; only used to size the abstract state.
  d.average_counts = {static_cast<double>(config_.members),
                      0.5 * static_cast<double>(config_.max_attackers)};
  d.ego_dim = 3;
  d.baseline_dim = 3 * (config_.members + config_.max_attackers) + 3;
  d.action_dim = 2;
  d.action_scale = config_.defender_max_step;
  return d;
}

void ConvoyEnv::reset() { state_ = convoy_reset(rng_(), config_); }

Transition ConvoyEnv::step(std::span<const double> action) {
  if (action.size() != 2) throw std::invalid_argument("convoy: action must be 2-D");
  auto r = convoy_step(state_, {action[0], action[1]}, config_);
  state_ = std::move(r.state);
  return {r.reward, r.done, r.info};
}

std::vector<double> ConvoyEnv::greedy_action() const {
  const Vec2 a = convoy_greedy_policy(state_, config_);
  return {a.x, a.y};
}

}  // namespace perminv
