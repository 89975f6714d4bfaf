#pragma once

#include <cstdint>
#include <vector>

#include "perminv/environment.hpp"
#include "perminv/rng.hpp"

namespace perminv {

/// Kinematic convoy-protection world on the unit square. The defender moves
/// by clipped position deltas; attackers chase the nearest live convoy
/// member at twice the convoy speed.
struct ConvoyConfig {
  std::size_t members = 3;
  double member_spacing = 0.1;
  double convoy_speed = 0.005;
  double goal_x = 1.0;
  std::size_t spawn_points = 8;
  double spawn_probability = 0.02;  // per point per step
  std::size_t max_attackers = 6;    // alive at once
  double attacker_speed = 0.01;
  double block_radius = 0.06;
  double attack_radius = 0.04;
  double defender_max_step = 0.02;
  Vec2 defender_start{0.15, 0.5};
  int step_limit = 400;
  double block_reward = 0.1;
  double loss_reward = -1.0;
};

struct Entity {
  Vec2 pos;
  bool active = false;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct ConvoyState {
  std::vector<Entity> members;
  /// Slots in spawn order; a new attacker reuses the first inactive slot.
  std::vector<Entity> attackers;
  Vec2 defender;
  double heading = 0.0;
  int time = 0;
  bool terminal = false;
  Rng rng;

  std::size_t active_attackers() const;
  std::size_t active_members() const;

  friend bool operator==(const ConvoyState&, const ConvoyState&) = default;
};

/// Spawn locations equally spaced around the boundary of the unit square.
std::vector<Vec2> convoy_spawn_points(const ConvoyConfig& config = {});

ConvoyState convoy_reset(std::uint64_t seed, const ConvoyConfig& config = {});

StepResult<ConvoyState> convoy_step(const ConvoyState& state, Vec2 action,
                                    const ConvoyConfig& config = {});

/// Heads for the live attacker closest to any live convoy member; holds
/// position when no attacker is alive.
Vec2 convoy_greedy_policy(const ConvoyState& state, const ConvoyConfig& config = {});

/// Classes {live members, live attackers} as (x, y) rows; ego (x, y, heading).
ObjectSet to_object_set(const ConvoyState& state);

/// Members then attacker slots as (x, y, status) triples, inactive entries
/// zeroed, attacker slots zero-padded to `max_attackers`; then the ego.
/// Throws std::length_error when there are more slots than `max_attackers`.
std::vector<double> to_flat_baseline(const ConvoyState& state, std::size_t max_attackers);

class ConvoyEnv final : public Environment {
 public:
  explicit ConvoyEnv(std::uint64_t seed, ConvoyConfig config = {});

  EnvDescriptor describe() const override;
  void reset() override;
  Transition step(std::span<const double> action) override;
  ObjectSet object_set() const override { return to_object_set(state_); }
  std::vector<double> flat_baseline() const override {
    return to_flat_baseline(state_, config_.max_attackers);
  }
  std::vector<double> greedy_action() const override;

  const ConvoyState& state() const { return state_; }

 private:
  ConvoyConfig config_;
  Rng rng_;
  ConvoyState state_;
};

}  // namespace perminv
