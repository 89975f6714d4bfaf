#include "perminv/trajectory.hpp"

#include <fmt/format.h>

namespace perminv {

namespace {

std::string join(std::span<const double> values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) s += ' ';
    s += fmt::format("{:.17g}", values[i]);
  }
  return s;
}

}  // namespace

TrajectoryWriter::TrajectoryWriter(std::ostream& out) : out_(out) {
  out_ << "episode,step,state,action,reward,done\n";
}

void TrajectoryWriter::write(long episode, long step, std::span<const double> state,
                             std::span<const double> action, double reward, bool done) {
  out_ << fmt::format("{},{},{},{},{:.17g},{}\n", episode, step, join(state), join(action),
                      reward, done ? 1 : 0);
}

}  // namespace perminv
