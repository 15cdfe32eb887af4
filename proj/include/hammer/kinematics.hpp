#pragma once

#include "hammer/types.hpp"

#include <Eigen/Geometry>

namespace hammer {

/// Serial chain: yaw swing about the vertical axis, then three pitch joints
/// about the horizontal axis. Positive pitch rotates the link downward
/// (right-handed rotation about +y), so the tool pitch is q[1]+q[2]+q[3].
struct KinematicChain {
  double base_height = 0.3;
  std::array<double, 3> links{1.1, 0.9, 0.8};  // boom, arm, bucket/hammer
  double hammer_offset = 0.0;                  // along the tool's local -z
  JointVec q_min{-1.3, -0.9, -1.4, -1.2};
  JointVec q_max{1.3, 0.6, 0.4, 1.2};

  void validate() const;
  JointConfig clamp(const JointConfig& q) const { return q.cwiseMax(q_min).cwiseMin(q_max); }
};

/// End-effector pose in the base frame; quaternion stored scalar-first (w, x, y, z)
/// when serialized.
struct Pose {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Quaterniond r = Eigen::Quaterniond::Identity();
};

/// Cylindrical sector around the swing axis plus a pitch bound. All bounds closed.
struct Workspace {
  double r_min = 1.0, r_max = 3.0;
  double yaw_min = -1.2, yaw_max = 1.2;
  double z_min = 0.0, z_max = 2.5;
  double pitch_max = 1.047;
  // Target subset overrides.
  double pitch_ts = 0.698;
  double z_ts_min = 0.155, z_ts_max = 2.355;

  void validate() const;
};

enum class Region { Full, Target };

struct YawPitch {
  double yaw = 0.0;    // (-pi, pi]
  double pitch = 0.0;  // [-pi/2, pi/2]
  bool degenerate = false;
};

double wrap_angle(double a);

Pose forward_kinematics(const KinematicChain& chain, const JointConfig& q);

/// Z-Y intrinsic extraction (roll assumed zero for this chain).
YawPitch yaw_pitch(const Eigen::Quaterniond& r);

/// (1/pi) acos(2 (r1.r2)^2 - 1), in [0, 1].
double geodesic_distance(const Eigen::Quaterniond& r1, const Eigen::Quaterniond& r2);

double euclidean_distance(const Eigen::Vector3d& p1, const Eigen::Vector3d& p2);

bool in_workspace(const Workspace& ws, const Pose& pose);
bool in_target_subset(const Workspace& ws, const Pose& pose);
bool in_region(const Workspace& ws, const Pose& pose, Region region);

/// Sum of positive excursions outside the full region (radius, arc length at
/// the current radius, height, pitch). Zero iff in_workspace.
double workspace_violation(const Workspace& ws, const Pose& pose);

inline constexpr int kSampleBudget = 10000;

/// Rejection sampling of uniform configurations inside the joint limits until the
/// FK pose lies in the requested region. Throws SamplingBudgetExhausted.
JointConfig sample_config(const Workspace& ws, const KinematicChain& chain, Rng& rng, Region region);

/// Fraction of raw uniform draws accepted by sample_config's test.
double acceptance_fraction(const Workspace& ws, const KinematicChain& chain, Rng& rng, Region region,
                           int draws);

}  // namespace hammer
