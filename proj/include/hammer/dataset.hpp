#pragma once

#include "hammer/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hammer {

/// One continuous recording at the control rate. Velocities are not recorded;
/// `qd` is filled by the observer on load.
struct Trajectory {
  std::vector<JointConfig> q;
  std::vector<DiscreteAction> a;
  std::vector<JointVel> qd;

  std::size_t size() const { return q.size(); }
};

/// A set of trajectories that are never concatenated across boundaries.
struct Dataset {
  std::vector<Trajectory> trajectories;

  std::size_t total_samples() const;
};

/// CSV with header `t,q0,q1,q2,q3,a0,a1,a2,a3`, one row per tick.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, double dt = kControlDt);
std::string trajectory_csv(const Trajectory& traj, double dt = kControlDt);

/// Reads q and a; rejects malformed rows and non-monotone timestamps.
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace hammer
