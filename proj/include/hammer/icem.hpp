#pragma once

#include "hammer/env.hpp"

#include <ostream>
#include <vector>

namespace hammer {

struct IcemConfig {
  int horizon = 20;
  int population = 500;
  int elites = 50;
  double sigma0 = 0.5;
  double alpha = 0.05;  // weight kept on the previous mean / std
  int iterations = 12;
  double beta = 2.0;  // colored-noise exponent
  double elite_fraction = 0.5;  // share of elites carried into the next iteration / call
  int action_repeat = 4;
  double gamma = 0.97;
  RewardFlags flags{.pose = false, .config = true, .bonus = false, .action = true, .workspace = true};
  bool reset_sigma = true;  // sigma back to sigma0 at the start of every call
  bool add_mean = true;     // evaluate the mean sequence in the last iteration

  void validate() const;
  int carried() const { return int(elite_fraction * elites); }
};

/// Diagonal Gaussian over proto-action sequences; rows are time steps.
struct PlanDistribution {
  Eigen::MatrixXd mu, sigma;

  static PlanDistribution initial(int horizon, int act_dim, double sigma0);
};

/// Temporally correlated noise with power spectrum ~ f^-beta along the rows,
/// normalized to unit variance; beta = 0 gives white noise.
Eigen::MatrixXd colored_noise(double beta, int horizon, int act_dim, Rng& rng);

/// Rows move one step toward t; the last row gets mu = 0 and sigma = sigma0.
PlanDistribution shift_distribution(const PlanDistribution& d, double sigma0);

/// Discounted returns of discrete action sequences (horizon x act_dim, entries
/// in {-1, 0, 1}). NaN marks a sequence whose rollout failed.
class PlanBackend {
 public:
  virtual ~PlanBackend() = default;
  virtual int act_dim() const = 0;
  virtual Eigen::VectorXd evaluate(const std::vector<Eigen::MatrixXi>& seqs, double gamma) const = 0;
};

/// Rolls the learned model from a snapshot of the lag window, with action
/// repeats, scoring each step with the planner's reward terms.
class ModelPlanBackend final : public PlanBackend {
 public:
  ModelPlanBackend(const DynModel& model, const EnvConfig& env_cfg, RewardFlags flags, int action_repeat);

  void set_snapshot(const LagWindow& window, const JointConfig& q_target, const DiscreteAction& last_action);

  int act_dim() const override { return kJoints; }
  Eigen::VectorXd evaluate(const std::vector<Eigen::MatrixXi>& seqs, double gamma) const override;

 private:
  const DynModel* model_;
  EnvConfig cfg_;
  int repeat_;
  LagWindow window_;
  JointConfig q_target_ = JointConfig::Zero();
  Pose target_;
  DiscreteAction last_;
};

/// Distribution and elites carried between planning calls.
struct PlannerState {
  PlanDistribution dist;
  std::vector<Eigen::MatrixXd> elites;  // proto-sequences of the last call's elites, best first
  bool warm = false;                    // a previous call exists: shift before planning
};

PlannerState initial_planner_state(const IcemConfig& cfg, int act_dim);

struct PlanDiagnostics {
  std::vector<double> best_return;        // best sample of each iteration
  std::vector<double> mean_elite_return;  // per iteration
  int excluded = 0;                       // non-finite samples dropped
  double elapsed_ms = 0.0;
};

struct PlanResult {
  DiscreteAction action;
  Eigen::MatrixXd best_sequence;  // proto-actions
  double best_return = 0.0;
  PlanDiagnostics diag;
};

PlanResult plan(const PlanBackend& backend, PlannerState& state, const IcemConfig& cfg, Rng& rng);

/// One CSV row per iteration: call,iteration,best_return,mean_elite_return,elapsed_ms.
void write_plan_diagnostics(std::ostream& os, long call, const PlanDiagnostics& d, bool header);

}  // namespace hammer
