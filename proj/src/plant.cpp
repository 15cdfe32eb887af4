#include "hammer/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace hammer {

void PlantParams::validate() const {
  for (int j = 0; j < kJoints; ++j) {
    require(rate[j] > 0.0, "plant: rate must be > 0");
    require(tau[j] > 0.0, "plant: tau must be > 0");
    require(delay_steps[static_cast<std::size_t>(j)] >= 0 && delay_steps[static_cast<std::size_t>(j)] <= kMaxDelaySteps,
            "plant: delay_steps must be in [0, 20]");
  }
  require(coupling >= 0.0, "plant: coupling must be >= 0");
  require(noise_std >= 0.0, "plant: noise_std must be >= 0");
  require(dt > 0.0, "plant: dt must be > 0");
  for (int j = 0; j < kJoints; ++j) require(dt / tau[j] <= 1.0, "plant: dt/tau must be <= 1 for a stable lag update");
}

void ExciteConfig::validate() const {
  require(steps >= 1, "excite: steps must be >= 1");
  require(dwell_min >= 1 && dwell_max >= dwell_min, "excite: dwell range must satisfy 1 <= dwell_min <= dwell_max");
  require(lookahead_ticks >= 1, "excite: lookahead_ticks must be >= 1");
  require(grid_r > 0 && grid_yaw > 0 && grid_z > 0, "excite: grid dimensions must be > 0");
  require(reachable_samples > 0, "excite: reachable_samples must be > 0");
}

Plant::Plant(PlantParams params, KinematicChain chain) : params_(params), chain_(chain) {
  params_.validate();
  chain_.validate();
}

PlantState Plant::step(const PlantState& state, const DiscreteAction& a, Rng& rng) const {
  return advance(state, a, &rng);
}

PlantState Plant::step_noiseless(const PlantState& state, const DiscreteAction& a) const {
  return advance(state, a, nullptr);
}

PlantState Plant::advance(const PlantState& state, const DiscreteAction& a, Rng* rng) const {
  if (!a.valid()) throw ValidationError("plant: action components must be in {-1, 0, 1}");
  PlantState next = state;
  std::copy_backward(state.cmd_history.begin(), state.cmd_history.end() - 1, next.cmd_history.end());
  next.cmd_history[0] = a;

  std::array<int, kJoints> delayed{};
  int active = 0;
  for (int j = 0; j < kJoints; ++j) {
    delayed[static_cast<std::size_t>(j)] = next.cmd_history[static_cast<std::size_t>(params_.delay_steps[static_cast<std::size_t>(j)])][j];
    if (delayed[static_cast<std::size_t>(j)] != 0) ++active;
  }
  const double divisor = 1.0 + params_.coupling * double(std::max(active, 1) - 1);

  for (int j = 0; j < kJoints; ++j) {
    const double target = delayed[static_cast<std::size_t>(j)] * params_.rate[j] / divisor;
    double v = state.v[j] + (params_.dt / params_.tau[j]) * (target - state.v[j]);
    if (rng != nullptr && params_.noise_std > 0.0) v += params_.noise_std * standard_normal(*rng);
    double q = state.q[j] + params_.dt * v;
    if (q < chain_.q_min[j]) {
      q = chain_.q_min[j];
      v = 0.0;
    } else if (q > chain_.q_max[j]) {
      q = chain_.q_max[j];
      v = 0.0;
    }
    next.q[j] = q;
    next.v[j] = v;
  }
  return next;
}

namespace {

class OccupancyGrid {
 public:
  OccupancyGrid(const Workspace& ws, const ExciteConfig& cfg)
      : ws_(ws), nr_(cfg.grid_r), ny_(cfg.grid_yaw), nz_(cfg.grid_z), cells_(std::size_t(nr_ * ny_ * nz_), 0) {}

  long index(const Eigen::Vector3d& p) const {
    const double r = std::hypot(p.x(), p.y());
    const double yaw = std::atan2(p.y(), p.x());
    const int ir = bin(r, ws_.r_min, ws_.r_max, nr_);
    const int iy = bin(yaw, ws_.yaw_min, ws_.yaw_max, ny_);
    const int iz = bin(p.z(), ws_.z_min, ws_.z_max, nz_);
    if (ir < 0 || iy < 0 || iz < 0) return -1;
    return (long(ir) * ny_ + iy) * nz_ + iz;
  }

  void mark(const Eigen::Vector3d& p, char bit) {
    const long i = index(p);
    if (i >= 0) cells_[std::size_t(i)] |= bit;
  }

  int count(char mask) const {
    return int(std::count_if(cells_.begin(), cells_.end(), [mask](char c) { return (c & mask) == mask; }));
  }

 private:
  static int bin(double v, double lo, double hi, int n) {
    if (v < lo || v > hi) return -1;
    return std::min(n - 1, int((v - lo) / (hi - lo) * n));
  }

  Workspace ws_;
  int nr_, ny_, nz_;
  std::vector<char> cells_;
};

constexpr char kReachable = 1;
constexpr char kVisited = 2;

// Worst workspace violation along a noiseless lookahead holding `a`.
double lookahead_violation(const Plant& plant, const Workspace& ws, PlantState s, const DiscreteAction& a, int ticks) {
  double worst = 0.0;
  for (int i = 0; i < ticks; ++i) {
    s = plant.step_noiseless(s, a);
    worst = std::max(worst, workspace_violation(ws, forward_kinematics(plant.chain(), s.q)));
  }
  return worst;
}

DiscreteAction random_action(Rng& rng) {
  DiscreteAction a;
  for (int j = 0; j < kJoints; ++j) a[j] = uniform_int(rng, -1, 1);
  return a;
}

}  // namespace

ExciteResult excite(const Plant& plant, const Workspace& ws, const ExciteConfig& cfg, Rng& rng) {
  cfg.validate();
  ws.validate();
  const auto& chain = plant.chain();

  OccupancyGrid grid(ws, cfg);
  {
    Rng reach_rng(rng());
    for (int i = 0; i < cfg.reachable_samples; ++i)
      grid.mark(forward_kinematics(chain, sample_config(ws, chain, reach_rng, Region::Full)).p, kReachable);
  }

  ExciteResult out;
  auto& traj = out.trajectory;
  traj.q.reserve(std::size_t(cfg.steps));
  traj.a.reserve(std::size_t(cfg.steps));

  PlantState state = PlantState::at_rest(sample_config(ws, chain, rng, Region::Full));
  DiscreteAction held = random_action(rng);
  int dwell_left = uniform_int(rng, cfg.dwell_min, cfg.dwell_max);

  for (long t = 0; t < cfg.steps; ++t) {
    if (dwell_left == 0) {
      held = random_action(rng);
      dwell_left = uniform_int(rng, cfg.dwell_min, cfg.dwell_max);
    }
    --dwell_left;

    const double now = workspace_violation(ws, forward_kinematics(chain, state.q));
    auto acceptable = [&](double v) { return v <= now + 1e-12; };
    double best_violation = lookahead_violation(plant, ws, state, held, cfg.lookahead_ticks);
    if (!acceptable(best_violation)) {
      ++out.corrected_ticks;
      std::array<int, kJoints> order{0, 1, 2, 3};
      for (int i = kJoints - 1; i > 0; --i) std::swap(order[std::size_t(i)], order[std::size_t(uniform_int(rng, 0, i))]);

      DiscreteAction candidate = held;
      DiscreteAction best = held;
      for (int j : order) {
        if (candidate[j] == 0) continue;
        DiscreteAction flipped = candidate;
        flipped[j] = -candidate[j];
        const double vf = lookahead_violation(plant, ws, state, flipped, cfg.lookahead_ticks);
        if (vf < best_violation) {
          best_violation = vf;
          best = flipped;
        }
        if (acceptable(vf)) break;
        candidate[j] = 0;
        const double vz = lookahead_violation(plant, ws, state, candidate, cfg.lookahead_ticks);
        if (vz < best_violation) {
          best_violation = vz;
          best = candidate;
        }
        if (acceptable(vz)) break;
      }
      held = best;
    }

    traj.q.push_back(state.q);
    traj.a.push_back(held);
    grid.mark(forward_kinematics(chain, state.q).p, kVisited);
    state = plant.step(state, held, rng);
  }

  out.coverage.reachable_cells = grid.count(kReachable);
  out.coverage.visited_cells = grid.count(kReachable | kVisited);
  return out;
}

}  // namespace hammer
