#include "hammer/observer.hpp"

namespace hammer {

void TrackerGains::validate() const {
  require(kp > 0.0 && ki > 0.0, "observer: kp and ki must be > 0");
  require(dt > 0.0, "observer: dt must be > 0");
}

LoopTracker::LoopTracker(TrackerGains gains) : gains_(gains) { gains_.validate(); }

JointVel LoopTracker::update(const JointConfig& q_meas) {
  if (!initialized_) {
    tracked_ = q_meas;
    integral_.setZero();
    initialized_ = true;
    return integral_;
  }
  const JointVec err = q_meas - tracked_;
  integral_ += gains_.ki * gains_.dt * err;
  tracked_ += gains_.dt * (gains_.kp * err + integral_);
  return integral_;
}

void NormBounds::validate() const {
  for (int j = 0; j < kJoints; ++j) {
    require(q_min[j] < q_max[j], "norm bounds: q_min must be < q_max");
    require(qd_min[j] < qd_max[j], "norm bounds: qd_min must be < qd_max");
  }
}

JointVec minmax(const JointVec& x, const JointVec& lo, const JointVec& hi) {
  const JointVec c = x.cwiseMax(lo).cwiseMin(hi);
  return (2.0 * (c - lo).array() / (hi - lo).array() - 1.0).matrix();
}

JointVec minmax_slope(const JointVec& x, const JointVec& lo, const JointVec& hi) {
  JointVec s;
  for (int j = 0; j < kJoints; ++j) s[j] = (x[j] > lo[j] && x[j] < hi[j]) ? 2.0 / (hi[j] - lo[j]) : 0.0;
  return s;
}

Eigen::VectorXd build_state_vector(std::span<const JointVec> window, std::span<const JointVec> actions,
                                   const JointVec& current) {
  if (window.size() != actions.size() || window.empty())
    throw ValidationError("build_state_vector: window and action lengths must match and be >= 1");
  const Eigen::Index slots = Eigen::Index(window.size());
  Eigen::VectorXd x(8 * slots + 4);
  for (Eigen::Index s = 0; s < slots; ++s) {
    x.segment<4>(4 * s) = window[std::size_t(s)];
    x.segment<4>(4 * slots + 4 * s) = actions[std::size_t(s)];
  }
  x.tail<4>() = current;
  return x;
}

}  // namespace hammer
