#include "hammer/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace hammer {

std::size_t Dataset::total_samples() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

std::string trajectory_csv(const Trajectory& traj, double dt) {
  require(traj.q.size() == traj.a.size(), "trajectory: q and a must have equal length");
  std::string out = "t,q0,q1,q2,q3,a0,a1,a2,a3\n";
  out.reserve(out.size() + traj.size() * 110);
  char buf[256];
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& q = traj.q[i];
    const auto& a = traj.a[i];
    const int n = std::snprintf(buf, sizeof buf, "%.2f,%.17g,%.17g,%.17g,%.17g,%d,%d,%d,%d\n", double(i) * dt, q[0],
                                q[1], q[2], q[3], a[0], a[1], a[2], a[3]);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, double dt) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  f << trajectory_csv(traj, dt);
  if (!f) throw RuntimeFailure("write failed: " + path.string());
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("dataset not found: " + path.string());
  std::string line;
  if (!std::getline(f, line) || line.rfind("t,q0,q1,q2,q3,a0,a1,a2,a3", 0) != 0)
    throw ValidationError(path.string() + ": missing or unexpected CSV header");

  Trajectory traj;
  double last_t = -1e300;
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    double t;
    JointConfig q;
    DiscreteAction a;
    const int got = std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%d,%d,%d,%d", &t, &q[0], &q[1], &q[2], &q[3], &a[0],
                                &a[1], &a[2], &a[3]);
    if (got != 9) throw ValidationError(path.string() + ": malformed row " + std::to_string(row));
    if (!a.valid()) throw ValidationError(path.string() + ": action outside {-1,0,1} at row " + std::to_string(row));
    if (!(t > last_t)) throw ValidationError(path.string() + ": timestamps not increasing at row " + std::to_string(row));
    if (!q.allFinite()) throw ValidationError(path.string() + ": non-finite q at row " + std::to_string(row));
    last_t = t;
    traj.q.push_back(q);
    traj.a.push_back(a);
  }
  if (traj.size() == 0) throw ValidationError(path.string() + ": no samples");
  return traj;
}

}  // namespace hammer
