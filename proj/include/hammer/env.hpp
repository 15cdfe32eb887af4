#pragma once

#include "hammer/dynmodel.hpp"
#include "hammer/kinematics.hpp"
#include "hammer/observer.hpp"
#include "hammer/plant.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hammer {

struct RewardFlags {
  bool pose = true;     // r^X
  bool config = true;   // r^q
  bool bonus = true;    // r^eps
  bool action = true;   // r^a
  bool workspace = true;  // r^W

  /// Comma-separated subset of {X, q, eps, a, W}; empty string is rejected.
  static RewardFlags parse(const std::string& s);
  std::string to_string() const;
  bool any() const { return pose || config || bonus || action || workspace; }
  friend bool operator==(const RewardFlags&, const RewardFlags&) = default;
};

struct RewardConfig {
  double lambda_p = 1.0, lambda_r = 1.0, lambda_q = 1.0, lambda_a = 0.5, lambda_w = 2.0;
  double eps_p = 0.1, eps_r = 0.1;     // coarse pose bonus
  double eps_p2 = 0.05, eps_r2 = 0.02;  // fine pose bonus
  double eps_alpha = 1e-4;             // squared yaw / pitch error
  double eps_q = 0.0025;               // squared per-joint error
  double w_x = 0.5, w_alpha = 1.0, w_q = 1.0;
  RewardFlags flags;

  void validate() const;
  double upper_bound() const;
};

struct RewardBreakdown {
  double pose = 0.0, config = 0.0, bonus = 0.0, action = 0.0, workspace = 0.0;
  double total() const { return pose + config + bonus + action + workspace; }
};

/// Reward for the post-transition state. Disabled terms are zero.
RewardBreakdown reward(const RewardConfig& cfg, const JointConfig& q, const Pose& pose, const JointConfig& q_target,
                       const Pose& target, const DiscreteAction& a, const DiscreteAction& a_prev, bool inside);

struct EpisodeSpec {
  std::uint64_t seed = 0;
  JointConfig q_init = JointConfig::Zero();
  JointConfig q_target = JointConfig::Zero();
};

struct EnvConfig {
  KinematicChain chain;
  Workspace ws;
  RewardConfig reward;
  TrackerGains tracker;
  int t_reset = 500;
  int action_repeat = 4;

  void validate() const;
};

/// Initial config from the full region, target from the target subset.
EpisodeSpec sample_episode(const EnvConfig& cfg, std::uint64_t seed);
/// Episode i is sample_episode(derive_seed(seed, i)).
std::vector<EpisodeSpec> make_episode_list(const EnvConfig& cfg, int n, std::uint64_t seed);

void save_episode_list(const std::vector<EpisodeSpec>& eps, const std::filesystem::path& path);
std::vector<EpisodeSpec> load_episode_list(const std::filesystem::path& path);

enum class Backend { Model, Plant };
std::string to_string(Backend b);
Backend parse_backend(const std::string& s);  // "model" | "plant"

struct TickRecord {
  JointConfig q;
  Pose pose;
  DiscreteAction action;
  bool inside = true;
};

struct EnvState {
  EpisodeSpec episode;
  Pose target;
  LagWindow window;  // observation window; the model backend also steps it
  PlantState plant;
  LoopTracker tracker;
  Rng noise{0};
  Pose pose;
  DiscreteAction last_action;
  int t = 0;  // environment steps since reset or last target change
  std::vector<TickRecord>* recorder = nullptr;
};

struct StepResult {
  RewardBreakdown reward;
  int breaches = 0;  // ticks outside W+ during the repeat
};

/// Reaching task. Observation layout: state vector (window, actions, current
/// normalized config), pose (p, w x y z), normalized config, target pose,
/// normalized target config.
class Env {
 public:
  /// `plant` selects the plant backend; without it the model steps the state.
  /// The model always defines the observation window layout and normalization.
  Env(EnvConfig cfg, const DynModel& model, const Plant* plant = nullptr);

  const EnvConfig& config() const { return cfg_; }
  const DynModel& model() const { return *model_; }
  Backend backend() const { return plant_ ? Backend::Plant : Backend::Model; }
  int obs_dim() const { return model_->spec().input_dim() + 22; }

  void reset(EnvState& s, const EpisodeSpec& ep) const;
  void observe(const EnvState& s, Eigen::Ref<Eigen::VectorXd> obs) const;
  Eigen::VectorXd observe(const EnvState& s) const;

  StepResult step(EnvState& s, const DiscreteAction& a) const;
  /// Steps all states; the model backend batches every tick into one network call.
  void step_batch(std::span<EnvState* const> states, std::span<const DiscreteAction> actions,
                  std::span<StepResult> out) const;

  /// New target without resetting the arm (sequential protocol).
  void set_target(EnvState& s, const JointConfig& q_target) const;
  /// Test hook: puts the arm at rest at q (both backends) and records one tick.
  void teleport(EnvState& s, const JointConfig& q) const;

 private:
  void tick_plant(EnvState& s, const DiscreteAction& a) const;
  void record_tick(EnvState& s, const DiscreteAction& a, StepResult& r) const;
  StepResult finish_step(EnvState& s, const DiscreteAction& a, int breaches) const;

  EnvConfig cfg_;
  const DynModel* model_;
  const Plant* plant_;
};

}  // namespace hammer
