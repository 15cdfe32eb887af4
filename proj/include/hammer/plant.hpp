#pragma once

#include "hammer/dataset.hpp"
#include "hammer/kinematics.hpp"

#include <array>

namespace hammer {

inline constexpr int kMaxDelaySteps = 20;

/// Ground-truth actuator model: transport delay, first-order lag toward a
/// commanded rate, and a shared-supply slowdown when several joints move.
struct PlantParams {
  JointVec rate{0.35, 0.30, 0.40, 0.55};  // rad/s under a unit command
  JointVec tau{0.25, 0.35, 0.30, 0.20};   // s
  std::array<int, kJoints> delay_steps{4, 8, 6, 3};
  double coupling = 0.4;
  double noise_std = 0.002;  // rad/s, added to the lagged rate each tick
  double dt = kControlDt;

  void validate() const;
};

struct PlantState {
  JointConfig q = JointConfig::Zero();
  JointVel v = JointVel::Zero();
  // cmd_history[0] is the most recent command.
  std::array<DiscreteAction, kMaxDelaySteps + 1> cmd_history{};

  static PlantState at_rest(const JointConfig& q) {
    PlantState s;
    s.q = q;
    return s;
  }
};

class Plant {
 public:
  Plant(PlantParams params, KinematicChain chain);

  const PlantParams& params() const { return params_; }
  const KinematicChain& chain() const { return chain_; }

  /// One control tick. Consumes a normal draw per joint iff noise_std > 0.
  PlantState step(const PlantState& state, const DiscreteAction& a, Rng& rng) const;
  PlantState step_noiseless(const PlantState& state, const DiscreteAction& a) const;

 private:
  PlantState advance(const PlantState& state, const DiscreteAction& a, Rng* rng) const;

  PlantParams params_;
  KinematicChain chain_;
};

struct ExciteConfig {
  long steps = 24000;
  int dwell_min = 5;  // ticks
  int dwell_max = 40;
  int lookahead_ticks = 12;
  // Cylindrical occupancy grid over the workspace sector.
  int grid_r = 8, grid_yaw = 8, grid_z = 10;
  int reachable_samples = 20000;

  void validate() const;
};

struct Coverage {
  int reachable_cells = 0;
  int visited_cells = 0;
  double fraction() const { return reachable_cells ? double(visited_cells) / reachable_cells : 0.0; }
};

struct ExciteResult {
  Trajectory trajectory;
  Coverage coverage;
  long corrected_ticks = 0;  // ticks where the held action had to be modified
};

/// Scripted teleoperation stand-in: random discrete commands held for a random
/// dwell, corrected by a noiseless lookahead so the end effector keeps to the
/// restricted workspace.
ExciteResult excite(const Plant& plant, const Workspace& ws, const ExciteConfig& cfg, Rng& rng);

}  // namespace hammer
