#pragma once

#include "hammer/env.hpp"
#include "hammer/icem.hpp"
#include "hammer/ppo.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hammer {

struct EpisodeLog {
  std::uint64_t seed = 0;
  JointConfig q_target = JointConfig::Zero();
  Pose target;
  std::string backend, controller;
  std::vector<TickRecord> ticks;
  std::vector<RewardBreakdown> rewards;  // one per environment step

  double total_return() const;
};

/// Some tick has position error < eps_p and |pitch error| < eps_alpha.
bool success(const EpisodeLog& log, double eps_p, double eps_alpha);
/// Index of the first tick meeting the thresholds, or -1.
long first_success_tick(const EpisodeLog& log, double eps_p, double eps_alpha);

struct WorkspaceRates {
  double oow = 0.0;    // episodes with at least one tick outside W+
  double ooz = 0.0;    // episodes with at least one tick below z_min
  double min_z = 0.0;  // lowest end-effector height over all ticks
};
WorkspaceRates workspace_rates(std::span<const EpisodeLog> logs, const Workspace& ws);

/// Sum of end-effector displacements up to the first success at the thresholds
/// (or over the whole log).
double path_length(const EpisodeLog& log, double eps_p = 0.02, double eps_alpha = 0.02);

std::vector<double> sr_grid_position();  // 0.02, 0.04, ..., 0.34
std::vector<double> sr_grid_pitch();     // 0.02, 0.04, ..., 0.16

struct EpisodeMetrics {
  std::uint64_t seed = 0;
  double ret = 0.0;
  bool success_002 = false, success_004 = false;
  bool out_of_workspace = false, below_z = false;
  double min_z = 0.0;
  double path_length = 0.0;
};

struct MetricsReport {
  std::string controller, backend, protocol;
  int episodes = 0;
  double avg_return = 0.0;
  Eigen::MatrixXd sr;  // rows: position thresholds, cols: pitch thresholds
  double oow = 0.0, ooz = 0.0, min_z = 0.0;
  double eef_pl = 0.0;
  long plan_calls = 0;
  double mean_plan_ms = 0.0;
  std::vector<EpisodeMetrics> per_episode;

  /// SR at a grid point (thresholds must be on the grid).
  double sr_at(double eps_p, double eps_alpha) const;
};

MetricsReport compute_metrics(std::span<const EpisodeLog> logs, const Workspace& ws);

std::string report_json(const MetricsReport& r);
void write_report(const MetricsReport& r, const std::filesystem::path& prefix);  // .json, _episodes.csv, _sr.csv
std::string sr_csv(const Eigen::MatrixXd& sr);
/// plant SR minus model SR per grid cell.
Eigen::MatrixXd sr_gap(const MetricsReport& model, const MetricsReport& plant);

// ------------------------------------------------------------------ controllers

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Start of an episode (or of a new target in the sequential protocol) in `slot`.
  virtual void begin(int slot, const Env& env, EnvState& s) {
    (void)slot;
    (void)env;
    (void)s;
  }
  /// states[i] lives in slot i.
  virtual void act(const Env& env, std::span<EnvState* const> states, std::span<DiscreteAction> out) = 0;
  virtual long plan_calls() const { return 0; }
  virtual double mean_plan_ms() const { return 0.0; }
};

class NullController final : public Controller {
 public:
  std::string name() const override { return "null"; }
  void act(const Env& env, std::span<EnvState* const> states, std::span<DiscreteAction> out) override;
};

/// Test harness: teleports the arm onto the target at the start of each episode, then idles.
class OracleController final : public Controller {
 public:
  std::string name() const override { return "oracle"; }
  void begin(int slot, const Env& env, EnvState& s) override;
  void act(const Env& env, std::span<EnvState* const> states, std::span<DiscreteAction> out) override;
};

/// Deterministic policy: discretize(tanh(mean)).
class PpoController final : public Controller {
 public:
  explicit PpoController(const Policy& policy) : policy_(&policy) {}
  std::string name() const override { return "ppo"; }
  void act(const Env& env, std::span<EnvState* const> states, std::span<DiscreteAction> out) override;

 private:
  const Policy* policy_;
};

/// Receding-horizon iCEM on the learned model, one planner state per slot.
class IcemController final : public Controller {
 public:
  IcemController(const DynModel& model, const EnvConfig& env_cfg, IcemConfig cfg, std::uint64_t seed);
  std::string name() const override { return "icem"; }
  void begin(int slot, const Env& env, EnvState& s) override;
  void act(const Env& env, std::span<EnvState* const> states, std::span<DiscreteAction> out) override;
  long plan_calls() const override { return calls_; }
  double mean_plan_ms() const override { return calls_ ? total_ms_ / double(calls_) : 0.0; }
  void set_diagnostics(std::ostream* os) { diag_ = os; }

 private:
  IcemConfig cfg_;
  ModelPlanBackend backend_;
  std::uint64_t seed_;
  std::vector<PlannerState> planners_;
  std::vector<Rng> rngs_;
  long calls_ = 0;
  double total_ms_ = 0.0;
  std::ostream* diag_ = nullptr;
};

// ------------------------------------------------------------------ studies

enum class Protocol { Fixed, Sequential };
std::string to_string(Protocol p);
Protocol parse_protocol(const std::string& s);  // "fixed" | "sequential"

struct StudyConfig {
  Protocol protocol = Protocol::Fixed;
  int lockstep = 100;            // episodes stepped together (fixed protocol)
  int sequential_targets = 100;  // targets visited without reset (sequential protocol)
};

/// Runs every episode to timeout and returns the logs. The sequential protocol
/// starts from the first episode's initial config and then only changes targets.
std::vector<EpisodeLog> run_episodes(const Env& env, Controller& controller, const std::vector<EpisodeSpec>& episodes,
                                     const StudyConfig& cfg);
MetricsReport run_study(const Env& env, Controller& controller, const std::vector<EpisodeSpec>& episodes,
                        const StudyConfig& cfg);

struct AggregateRow {
  std::string metric;
  double mean = 0.0, std = 0.0;  // across seeds (population std)
};
/// Mean and std across per-seed reports of avg return, SR(0.02,0.02),
/// SR(0.04,0.04), OOW, OOZ, min z and EEF-PL.
std::vector<AggregateRow> aggregate_reports(std::span<const MetricsReport> reports);

}  // namespace hammer
