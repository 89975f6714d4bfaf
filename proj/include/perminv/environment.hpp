#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "perminv/set_encoder.hpp"

namespace perminv {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
  double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Scales `v` down to magnitude `limit` when it is longer; direction kept.
Vec2 clip_norm(Vec2 v, double limit);

/// Diagnostic labels attached to a transition.
struct StepInfo {
  bool reached_food = false;
  bool reached_poison = false;
  bool timeout = false;
  int blocked = 0;
  int members_lost = 0;
  bool convoy_finished = false;

  /// Name of the terminal cause, or "" when the step did not end the episode.
  std::string terminal_cause() const;
};

template <typename State>
struct StepResult {
  State state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Static shape of a task's observations.
struct EnvDescriptor {
  std::vector<std::size_t> class_dims;
  std::vector<double> average_counts;
  std::size_t ego_dim = 0;
  std::size_t baseline_dim = 0;
  std::size_t action_dim = 2;
  /// Largest action magnitude the environment accepts before clipping.
  double action_scale = 1.0;
};

struct Transition {
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Episodic task with its own random stream for episode draws.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvDescriptor describe() const = 0;
  /// Starts a new episode from the next draw of the environment's stream.
  virtual void reset() = 0;
  virtual Transition step(std::span<const double> action) = 0;
  virtual ObjectSet object_set() const = 0;
  /// Fixed-order concatenation used by the baseline representation.
  virtual std::vector<double> flat_baseline() const = 0;
  /// Reference heuristic action for the current state.
  virtual std::vector<double> greedy_action() const = 0;
};

enum class TaskId { scavenger1, scavenger2, convoy };

TaskId task_from_string(const std::string& name);
std::string to_string(TaskId task);

/// `objects` is the food count for the scavenger tasks and is ignored for
/// the convoy task.
std::unique_ptr<Environment> make_environment(TaskId task, std::size_t objects,
                                              std::uint64_t seed);

}  // namespace perminv
