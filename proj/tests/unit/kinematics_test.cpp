#include "hammer/kinematics.hpp"

#include <doctest.h>

#include <cmath>

using namespace hammer;

namespace {

// Homogeneous-transform product, written independently of the production FK.
Eigen::Matrix4d rot_z(double a) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = std::cos(a);
  m(0, 1) = -std::sin(a);
  m(1, 0) = std::sin(a);
  m(1, 1) = std::cos(a);
  return m;
}
Eigen::Matrix4d rot_y(double a) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = std::cos(a);
  m(0, 2) = std::sin(a);
  m(2, 0) = -std::sin(a);
  m(2, 2) = std::cos(a);
  return m;
}
Eigen::Matrix4d trans(double x, double y, double z) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 3) = x;
  m(1, 3) = y;
  m(2, 3) = z;
  return m;
}

Eigen::Matrix4d oracle_fk(const KinematicChain& c, const JointConfig& q) {
  return trans(0, 0, c.base_height) * rot_z(q[0]) * rot_y(q[1]) * trans(c.links[0], 0, 0) * rot_y(q[2]) *
         trans(c.links[1], 0, 0) * rot_y(q[3]) * trans(c.links[2], 0, 0) * trans(0, 0, -c.hammer_offset);
}

void check_against_oracle(const KinematicChain& c, const JointConfig& q, double tol) {
  const Pose p = forward_kinematics(c, q);
  const Eigen::Matrix4d t = oracle_fk(c, q);
  CHECK((p.p - t.block<3, 1>(0, 3)).cwiseAbs().maxCoeff() < tol);
  const Eigen::Matrix3d r = p.r.toRotationMatrix();
  CHECK((r - t.block<3, 3>(0, 0)).cwiseAbs().maxCoeff() < tol);
  CHECK(std::abs(p.r.norm() - 1.0) < 1e-9);
}

}  // namespace

TEST_CASE("fk at zero config is a straight chain along x") {
  const KinematicChain c;
  const Pose p = forward_kinematics(c, JointConfig::Zero());
  CHECK(p.p.x() == doctest::Approx(2.8));
  CHECK(std::abs(p.p.y()) < 1e-12);
  CHECK(p.p.z() == doctest::Approx(0.3));
  const auto yp = yaw_pitch(p.r);
  CHECK(std::abs(yp.yaw) < 1e-12);
  CHECK(std::abs(yp.pitch) < 1e-12);
}

TEST_CASE("fk swing by pi/2 rotates onto y") {
  const Pose p = forward_kinematics(KinematicChain{}, JointConfig(M_PI / 2, 0, 0, 0));
  CHECK(std::abs(p.p.x()) < 1e-12);
  CHECK(p.p.y() == doctest::Approx(2.8));
  CHECK(p.p.z() == doctest::Approx(0.3));
}

TEST_CASE("fk matches homogeneous transform oracle") {
  KinematicChain c;
  check_against_oracle(c, JointConfig(0.3, -0.4, 0.5, 0.2), 1e-10);
  c.hammer_offset = 0.25;
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    JointConfig q;
    for (int j = 0; j < 4; ++j) q[j] = uniform(rng, -3.0, 3.0);
    const Pose p = forward_kinematics(c, q);
    const Eigen::Matrix4d t = oracle_fk(c, q);
    REQUIRE((p.p - t.block<3, 1>(0, 3)).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE((p.r.toRotationMatrix() - t.block<3, 3>(0, 0)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fk has zero roll, yaw = swing, pitch = sum of pitch joints") {
  const KinematicChain c;
  auto yp = yaw_pitch(forward_kinematics(c, JointConfig(0.7, 0.1, 0.2, 0.3)).r);
  CHECK(yp.yaw == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(yp.pitch == doctest::Approx(0.6).epsilon(1e-12));
  yp = yaw_pitch(forward_kinematics(c, JointConfig(0, 0.5, -0.5, 0)).r);
  CHECK(std::abs(yp.yaw) < 1e-12);
  CHECK(std::abs(yp.pitch) < 1e-12);

  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    JointConfig q(uniform(rng, -1.3, 1.3), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.4, 0.4));
    const Eigen::Matrix3d r = forward_kinematics(c, q).r.toRotationMatrix();
    // Roll zero: the tool's y axis stays horizontal.
    REQUIRE(std::abs(r(2, 1)) < 1e-12);
    const auto e = yaw_pitch(forward_kinematics(c, q).r);
    REQUIRE(std::abs(e.yaw - q[0]) < 1e-10);
    REQUIRE(std::abs(e.pitch - (q[1] + q[2] + q[3])) < 1e-10);
  }
}

TEST_CASE("yaw_pitch of identity and degenerate flag") {
  const auto yp = yaw_pitch(Eigen::Quaterniond::Identity());
  CHECK(yp.yaw == 0.0);
  CHECK(yp.pitch == 0.0);
  CHECK_FALSE(yp.degenerate);
  const Eigen::Quaterniond down(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitY()));
  CHECK(yaw_pitch(down).degenerate);
  CHECK(yaw_pitch(down).pitch == doctest::Approx(M_PI / 2));
}

TEST_CASE("geodesic distance closed form") {
  const Eigen::Quaterniond r(Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, 2, 3).normalized()));
  CHECK(geodesic_distance(r, r) == doctest::Approx(0.0).scale(1));
  const Eigen::Quaterniond neg(-r.w(), -r.x(), -r.y(), -r.z());
  CHECK(geodesic_distance(r, neg) < 1e-7);
  const Eigen::Quaterniond a(Eigen::AngleAxisd(0.1, Eigen::Vector3d::UnitZ()));
  const Eigen::Quaterniond b(Eigen::AngleAxisd(0.1 + M_PI / 2, Eigen::Vector3d::UnitZ()));
  CHECK(geodesic_distance(a, b) == doctest::Approx(0.5).epsilon(1e-12));

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d axis = Eigen::Vector3d(standard_normal(rng), standard_normal(rng), standard_normal(rng)).normalized();
    const double theta = uniform(rng, 0.0, M_PI);
    const Eigen::Quaterniond q0(Eigen::AngleAxisd(uniform(rng, -3, 3), Eigen::Vector3d(1, 0, 1).normalized()));
    const Eigen::Quaterniond q1 = Eigen::Quaterniond(Eigen::AngleAxisd(theta, axis)) * q0;
    // acos loses precision near 0 and pi; compare away from the ends at 1e-9.
    if (theta > 1e-3 && theta < M_PI - 1e-3) REQUIRE(std::abs(geodesic_distance(q0, q1) - theta / M_PI) < 1e-9);
    REQUIRE(geodesic_distance(q0, q1) == doctest::Approx(geodesic_distance(q1, q0)).epsilon(1e-12));
  }
}

TEST_CASE("euclidean distance") {
  CHECK(euclidean_distance({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(euclidean_distance({0, 0, 0}, {3, 4, 0}) == 5.0);
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d a(standard_normal(rng), standard_normal(rng), standard_normal(rng)), b(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    REQUIRE(std::abs(euclidean_distance(a, b) - std::sqrt(s)) < 1e-12);
  }
}

TEST_CASE("workspace membership boundaries") {
  const Workspace ws;
  Pose p;
  p.p = Eigen::Vector3d(2.0, 0.0, 1.25);
  CHECK(in_workspace(ws, p));
  CHECK(workspace_violation(ws, p) == 0.0);
  p.p.z() = ws.z_min - 0.01;
  CHECK_FALSE(in_workspace(ws, p));
  CHECK(workspace_violation(ws, p) > 0.0);

  p.p = Eigen::Vector3d(2.0, 0.0, 1.0);
  p.r = Eigen::Quaterniond(Eigen::AngleAxisd(0.698, Eigen::Vector3d::UnitY()));
  CHECK(in_target_subset(ws, p));
  p.r = Eigen::Quaterniond(Eigen::AngleAxisd(0.70, Eigen::Vector3d::UnitY()));
  CHECK_FALSE(in_target_subset(ws, p));
  CHECK(in_workspace(ws, p));
  p.r = Eigen::Quaterniond(Eigen::AngleAxisd(1.06, Eigen::Vector3d::UnitY()));
  CHECK_FALSE(in_workspace(ws, p));

  p.r = Eigen::Quaterniond::Identity();
  p.p = Eigen::Vector3d(0.5, 0.0, 1.0);  // inside the inner radius
  CHECK_FALSE(in_workspace(ws, p));
  p.p = Eigen::Vector3d(2.0 * std::cos(1.3), 2.0 * std::sin(1.3), 1.0);  // outside the yaw sector
  CHECK_FALSE(in_workspace(ws, p));
}

TEST_CASE("workspace membership invariant under yaw rotation for a full sector") {
  Workspace ws;
  ws.yaw_min = -M_PI;
  ws.yaw_max = M_PI;
  Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    Pose p;
    p.p = Eigen::Vector3d(uniform(rng, -3.5, 3.5), uniform(rng, -3.5, 3.5), uniform(rng, -0.5, 3.0));
    p.r = Eigen::Quaterniond(Eigen::AngleAxisd(uniform(rng, -1.5, 1.5), Eigen::Vector3d::UnitY()));
    const Eigen::Quaterniond yaw(Eigen::AngleAxisd(uniform(rng, -M_PI, M_PI), Eigen::Vector3d::UnitZ()));
    Pose q;
    q.p = yaw * p.p;
    q.r = yaw * p.r;
    REQUIRE(in_workspace(ws, p) == in_workspace(ws, q));
  }
}

TEST_CASE("sample_config satisfies its region") {
  const Workspace ws;
  const KinematicChain c;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const JointConfig q = sample_config(ws, c, rng, Region::Full);
    REQUIRE(in_workspace(ws, forward_kinematics(c, q)));
    REQUIRE(((q.array() >= c.q_min.array()) && (q.array() <= c.q_max.array())).all());
  }
  for (int i = 0; i < 1000; ++i) {
    const Pose p = forward_kinematics(c, sample_config(ws, c, rng, Region::Target));
    REQUIRE(in_target_subset(ws, p));
    REQUIRE(std::abs(yaw_pitch(p.r).pitch) <= 0.698);
    REQUIRE(p.p.z() >= 0.155);
    REQUIRE(p.p.z() <= 2.355);
  }
  Rng r1(77), r2(77);
  for (int i = 0; i < 50; ++i) REQUIRE(sample_config(ws, c, r1, Region::Full) == sample_config(ws, c, r2, Region::Full));
  CHECK(acceptance_fraction(ws, c, rng, Region::Full, 20000) > 0.01);
  CHECK(acceptance_fraction(ws, c, rng, Region::Target, 20000) > 0.01);
}

TEST_CASE("sample_config reports an impossible workspace") {
  Workspace ws;
  ws.r_min = 10.0;
  ws.r_max = 11.0;
  Rng rng(1);
  CHECK_THROWS_AS(sample_config(ws, KinematicChain{}, rng, Region::Full), SamplingBudgetExhausted);
}

TEST_CASE("chain and workspace validation") {
  KinematicChain c;
  c.links[1] = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  Workspace ws;
  ws.r_min = 3.5;
  CHECK_THROWS_AS(ws.validate(), ValidationError);
}
