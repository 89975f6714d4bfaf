#pragma once

#include <ostream>
#include <span>

namespace perminv {

/// Debug dump of transitions as CSV:
/// episode,step,state,action,reward,done with vector fields space-separated.
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(std::ostream& out);

  void write(long episode, long step, std::span<const double> state,
             std::span<const double> action, double reward, bool done);

 private:
  std::ostream& out_;
};

}  // namespace perminv
