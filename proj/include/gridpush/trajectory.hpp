#pragma once

// Recorded push trajectories: the unit of identification data.

#include "gridpush/lcp_dynamics.hpp"

#include <string>
#include <vector>

namespace gridpush {

enum class Provenance : unsigned char { kSynthetic, kExternal };

struct TrajectoryRecord {
  std::vector<Vector> poses;       // states 0..T
  std::vector<Vector> velocities;  // states 0..T
  std::vector<PushAction> actions;  // actions 0..T-1
  Provenance provenance = Provenance::kSynthetic;
  std::string name;

  std::size_t state_count() const { return poses.size(); }

  void validate(Index dofs) const {
    GRIDPUSH_REQUIRE(poses.size() == velocities.size(), InvalidArgument,
                     "trajectory " + name + ": pose and velocity counts differ");
    GRIDPUSH_REQUIRE(poses.size() == actions.size() + 1, InvalidArgument,
                     "trajectory " + name + ": expected one more state than actions");
    for (std::size_t t = 0; t < poses.size(); ++t)
      GRIDPUSH_REQUIRE(poses[t].size() == dofs && velocities[t].size() == dofs, InvalidArgument,
                       "trajectory " + name + ": state " + std::to_string(t) + " has the wrong length");
  }
};

using Dataset = std::vector<TrajectoryRecord>;

// Runs the simulator and records every state, starting with `initial`.
inline TrajectoryRecord record_trajectory(const GridBody& body, const BodyState& initial,
                                          const std::vector<PushAction>& actions, const SolverConfig& config = {}) {
  TrajectoryRecord rec;
  rec.actions = actions;
  rec.poses.push_back(initial.pose);
  rec.velocities.push_back(initial.velocity);
  for (const auto& step : simulate(body, initial, actions, config)) {
    rec.poses.push_back(step.state.pose);
    rec.velocities.push_back(step.state.velocity);
  }
  return rec;
}

}  // namespace gridpush
