#pragma once

#include "hammer/types.hpp"

#include <span>

namespace hammer {

struct TrackerGains {
  double kp = 10.0;
  double ki = 60.0;
  double dt = kControlDt;

  void validate() const;
};

/// PI loop tracker on measured joint positions. The integral state is the
/// velocity estimate; the full PI output is not used.
class LoopTracker {
 public:
  explicit LoopTracker(TrackerGains gains = {});

  /// First call latches the measurement (tracked position = q, integral = 0).
  JointVel update(const JointConfig& q_meas);
  void reset() { initialized_ = false; }

  const JointVel& estimate() const { return integral_; }
  const TrackerGains& gains() const { return gains_; }

 private:
  TrackerGains gains_;
  bool initialized_ = false;
  JointConfig tracked_ = JointConfig::Zero();
  JointVel integral_ = JointVel::Zero();
};

/// Min-max bounds for positions (joint limits) and velocities (from data).
struct NormBounds {
  JointVec q_min = JointVec::Constant(-1.0), q_max = JointVec::Constant(1.0);
  JointVec qd_min = JointVec::Constant(-1.0), qd_max = JointVec::Constant(1.0);

  void validate() const;
};

/// 2 (x - lo) / (hi - lo) - 1 after clamping x to [lo, hi].
JointVec minmax(const JointVec& x, const JointVec& lo, const JointVec& hi);

/// d minmax / dx per component: 2 / (hi - lo) strictly inside the bounds, 0 where clamped.
JointVec minmax_slope(const JointVec& x, const JointVec& lo, const JointVec& hi);

inline int state_vector_dim(int lags) { return 8 * (lags + 1) + 4; }

/// Layout: window (oldest first, 4 per slot), actions (oldest first), current normalized config.
Eigen::VectorXd build_state_vector(std::span<const JointVec> window, std::span<const JointVec> actions,
                                   const JointVec& current);

}  // namespace hammer
