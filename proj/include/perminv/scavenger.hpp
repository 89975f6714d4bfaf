#pragma once

#include <cstdint>
#include <vector>

#include "perminv/environment.hpp"

namespace perminv {

/// World and dynamics constants for the food-scavenger tasks.
struct ScavengerConfig {
  double world_half_width = 1.0;  // world is [-w, w]^2
  double delta = 1.0;             // time-step interval
  double max_speed = 0.05;        // action magnitude bound
  double capture_radius = 0.05;
  int step_limit = 200;
  double step_reward = -0.05;
  double food_reward = 1.0;
  double poison_reward = -1.0;
};

/// Task 1 has food only; task 2 adds one poison particle per food particle.
/// Positions are absolute; observations expose them relative to the agent.
struct ScavengerState {
  int task = 1;
  Vec2 ego;
  std::vector<Vec2> food;
  std::vector<Vec2> poison;
  int steps = 0;
  bool terminal = false;

  std::vector<Vec2> food_offsets() const;
  std::vector<Vec2> poison_offsets() const;
  /// Food offsets, poison offsets (task 2), then ego position.
  std::vector<double> vector() const;

  friend bool operator==(const ScavengerState&, const ScavengerState&) = default;
};

ScavengerState scavenger_reset(int task, std::size_t m, std::uint64_t seed,
                               const ScavengerConfig& config = {});

StepResult<ScavengerState> scavenger_step(const ScavengerState& state, Vec2 action,
                                          const ScavengerConfig& config = {});

/// Full-speed move toward the nearest food (lowest index on ties), shortened
/// to land exactly on it when it is within one step.
Vec2 greedy_policy(const ScavengerState& state, const ScavengerConfig& config = {});

/// One class of food offsets (task 2: a second class of poison offsets) plus
/// the ego position.
ObjectSet to_object_set(const ScavengerState& state);
std::vector<double> to_flat_baseline(const ScavengerState& state);

class ScavengerEnv final : public Environment {
 public:
  ScavengerEnv(int task, std::size_t m, std::uint64_t seed, ScavengerConfig config = {});

  EnvDescriptor describe() const override;
  void reset() override;
  Transition step(std::span<const double> action) override;
  ObjectSet object_set() const override { return to_object_set(state_); }
  std::vector<double> flat_baseline() const override { return to_flat_baseline(state_); }
  std::vector<double> greedy_action() const override;

  const ScavengerState& state() const { return state_; }
  void set_state(ScavengerState state) { state_ = std::move(state); }

 private:
  int task_;
  std::size_t m_;
  ScavengerConfig config_;
  Rng rng_;
  ScavengerState state_;
};

}  // namespace perminv
