#include "perminv/environment.hpp"

#include <stdexcept>

#include "perminv/convoy.hpp"
#include "perminv/scavenger.hpp"

namespace perminv {

Vec2 clip_norm(Vec2 v, double limit) {
  const double n = v.norm();
  if (n <= limit) return v;
  return (limit / n) * v;
}

std::string StepInfo::terminal_cause() const {
  if (reached_food) return "reached-food";
  if (reached_poison) return "reached-poison";
  if (convoy_finished) return "convoy-finished";
  if (timeout) return "timeout";
  return "";
}

TaskId task_from_string(const std::string& name) {
  if (name == "scavenger1") return TaskId::scavenger1;
  if (name == "scavenger2") return TaskId::scavenger2;
  if (name == "convoy") return TaskId::convoy;
  throw std::invalid_argument("unknown task '" + name + "'");
}

std::string to_string(TaskId task) {
  switch (task) {
    case TaskId::scavenger1:
      return "scavenger1";
    case TaskId::scavenger2:
      return "scavenger2";
    case TaskId::convoy:
      return "convoy";
  }
  return "";
}

std::unique_ptr<Environment> make_environment(TaskId task, std::size_t objects,
                                              std::uint64_t seed) {
  switch (task) {
    case TaskId::scavenger1:
      return std::make_unique<ScavengerEnv>(1, objects, seed);
    case TaskId::scavenger2:
      return std::make_unique<ScavengerEnv>(2, objects, seed);
    case TaskId::convoy:
      return std::make_unique<ConvoyEnv>(seed);
  }
  throw std::invalid_argument("unknown task");
}

}  // namespace perminv
