#include "hammer/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hammer {

void KinematicChain::validate() const {
  require(base_height > 0.0, "kinematics: base_height must be > 0");
  for (double l : links) require(l > 0.0, "kinematics: link lengths must be > 0");
  require(hammer_offset >= 0.0, "kinematics: hammer_offset must be >= 0");
  for (int j = 0; j < kJoints; ++j)
    require(q_min[j] < q_max[j], "kinematics: q_min must be < q_max for every joint");
}

void Workspace::validate() const {
  require(r_min < r_max, "workspace: r_min must be < r_max");
  require(yaw_min < yaw_max, "workspace: yaw_min must be < yaw_max");
  require(z_min < z_max, "workspace: z_min must be < z_max");
  require(pitch_max > 0.0, "workspace: pitch_max must be > 0");
  require(pitch_ts > 0.0 && pitch_ts <= pitch_max, "workspace: pitch_ts must be in (0, pitch_max]");
  require(z_ts_min < z_ts_max && z_ts_min >= z_min && z_ts_max <= z_max,
          "workspace: target z band must lie inside [z_min, z_max]");
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::fmod(a + pi, 2.0 * pi);
  if (a <= 0.0) a += 2.0 * pi;
  return a - pi;
}

Pose forward_kinematics(const KinematicChain& chain, const JointConfig& q) {
  const double phi1 = q[1];
  const double phi2 = phi1 + q[2];
  const double phi3 = phi2 + q[3];

  const double radial = chain.links[0] * std::cos(phi1) + chain.links[1] * std::cos(phi2) +
                        chain.links[2] * std::cos(phi3) - chain.hammer_offset * std::sin(phi3);
  const double z = chain.base_height - chain.links[0] * std::sin(phi1) - chain.links[1] * std::sin(phi2) -
                   chain.links[2] * std::sin(phi3) - chain.hammer_offset * std::cos(phi3);

  Pose pose;
  pose.p = {radial * std::cos(q[0]), radial * std::sin(q[0]), z};
  // Rz(q0) * Ry(phi3), written out.
  const double cy = std::cos(0.5 * q[0]), sy = std::sin(0.5 * q[0]);
  const double cp = std::cos(0.5 * phi3), sp = std::sin(0.5 * phi3);
  pose.r = Eigen::Quaterniond(cy * cp, -sy * sp, cy * sp, sy * cp);
  pose.r.normalize();
  return pose;
}

YawPitch yaw_pitch(const Eigen::Quaterniond& r) {
  const double w = r.w(), x = r.x(), y = r.y(), z = r.z();
  const double r00 = 1.0 - 2.0 * (y * y + z * z);
  const double r10 = 2.0 * (x * y + w * z);
  const double r20 = 2.0 * (x * z - w * y);
  YawPitch out;
  out.pitch = std::asin(std::clamp(-r20, -1.0, 1.0));
  out.degenerate = std::abs(std::abs(out.pitch) - 0.5 * std::numbers::pi) < 1e-6;
  if (out.degenerate) {
    const double r01 = 2.0 * (x * y - w * z);
    const double r11 = 1.0 - 2.0 * (x * x + z * z);
    out.yaw = std::atan2(-r01, r11);
  } else {
    out.yaw = std::atan2(r10, r00);
  }
  if (out.yaw <= -std::numbers::pi) out.yaw += 2.0 * std::numbers::pi;
  return out;
}

double geodesic_distance(const Eigen::Quaterniond& r1, const Eigen::Quaterniond& r2) {
  const double dot = r1.coeffs().dot(r2.coeffs());
  return std::acos(std::clamp(2.0 * dot * dot - 1.0, -1.0, 1.0)) / std::numbers::pi;
}

double euclidean_distance(const Eigen::Vector3d& p1, const Eigen::Vector3d& p2) { return (p1 - p2).norm(); }

namespace {

struct Cylindrical {
  double radius, azimuth, z;
};

Cylindrical cylindrical(const Eigen::Vector3d& p) { return {std::hypot(p.x(), p.y()), std::atan2(p.y(), p.x()), p.z()}; }

bool in_box(const Workspace& ws, const Pose& pose, double pitch_bound, double z_lo, double z_hi) {
  const auto c = cylindrical(pose.p);
  if (c.radius < ws.r_min || c.radius > ws.r_max) return false;
  if (c.azimuth < ws.yaw_min || c.azimuth > ws.yaw_max) return false;
  if (c.z < z_lo || c.z > z_hi) return false;
  return std::abs(yaw_pitch(pose.r).pitch) <= pitch_bound;
}

}  // namespace

bool in_workspace(const Workspace& ws, const Pose& pose) { return in_box(ws, pose, ws.pitch_max, ws.z_min, ws.z_max); }

bool in_target_subset(const Workspace& ws, const Pose& pose) {
  const double z_lo = std::max(ws.z_min, ws.z_ts_min);
  const double z_hi = std::min(ws.z_max, ws.z_ts_max);
  return in_box(ws, pose, std::min(ws.pitch_max, ws.pitch_ts), z_lo, z_hi);
}

bool in_region(const Workspace& ws, const Pose& pose, Region region) {
  return region == Region::Full ? in_workspace(ws, pose) : in_target_subset(ws, pose);
}

double workspace_violation(const Workspace& ws, const Pose& pose) {
  const auto c = cylindrical(pose.p);
  auto excess = [](double v, double lo, double hi) { return std::max(0.0, lo - v) + std::max(0.0, v - hi); };
  const double pitch = std::abs(yaw_pitch(pose.r).pitch);
  return excess(c.radius, ws.r_min, ws.r_max) + c.radius * excess(c.azimuth, ws.yaw_min, ws.yaw_max) +
         excess(c.z, ws.z_min, ws.z_max) + std::max(0.0, pitch - ws.pitch_max);
}

namespace {

JointConfig uniform_config(const KinematicChain& chain, Rng& rng) {
  JointConfig q;
  for (int j = 0; j < kJoints; ++j) q[j] = uniform(rng, chain.q_min[j], chain.q_max[j]);
  return q;
}

}  // namespace

JointConfig sample_config(const Workspace& ws, const KinematicChain& chain, Rng& rng, Region region) {
  for (int attempt = 0; attempt < kSampleBudget; ++attempt) {
    const JointConfig q = uniform_config(chain, rng);
    if (in_region(ws, forward_kinematics(chain, q), region)) return q;
  }
  throw SamplingBudgetExhausted("sample_config: no valid configuration after " + std::to_string(kSampleBudget) +
                                " draws; workspace and chain are inconsistent");
}

double acceptance_fraction(const Workspace& ws, const KinematicChain& chain, Rng& rng, Region region, int draws) {
  require(draws > 0, "acceptance_fraction: draws must be > 0");
  int accepted = 0;
  for (int i = 0; i < draws; ++i)
    if (in_region(ws, forward_kinematics(chain, uniform_config(chain, rng)), region)) ++accepted;
  return double(accepted) / draws;
}

}  // namespace hammer
