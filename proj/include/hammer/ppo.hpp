#pragma once

#include "hammer/env.hpp"
#include "hammer/nn.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace hammer {

/// Per-component thresholding at +-0.5; |a_p| = 0.5 maps to 0.
DiscreteAction discretize(const Eigen::Ref<const Eigen::VectorXd>& a_p);

struct PpoConfig {
  double lr = 3e-4;
  double entropy_cost = 1e-2;
  double gamma = 0.97;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double value_cost = 0.5;
  int unroll = 40;
  int batch = 256;  // unrolls per update batch
  int minibatches = 32;
  int num_envs = 32;
  int updates_per_batch = 4;
  long total_steps = 2'000'000;  // environment steps (decisions)
  std::vector<int> actor_hidden{128, 128};
  std::vector<int> critic_hidden{128, 128};
  double init_log_std = 0.0;

  void validate() const;
  long steps_per_batch() const { return long(batch) * unroll; }
};

/// Running mean / variance of observations (parallel Welford merge per batch).
struct ObsNormalizer {
  Eigen::VectorXd mean, m2;
  double count = 0.0;
  double clip = 10.0;

  explicit ObsNormalizer(int dim = 0) : mean(Eigen::VectorXd::Zero(dim)), m2(Eigen::VectorXd::Zero(dim)) {}
  void update(const nn::Matrix& obs);
  Eigen::VectorXd stddev() const;
  nn::Matrix apply(const nn::Matrix& obs) const;
};

/// Actor emits (mean, log-std) per proto-action component; the sample is
/// tanh-squashed. Critic emits a scalar value. Both see normalized observations.
class Policy {
 public:
  Policy() = default;
  Policy(int obs_dim, int act_dim, const std::vector<int>& actor_hidden, const std::vector<int>& critic_hidden);

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  void init(Rng& rng, double init_log_std = 0.0);

  nn::Mlp actor, critic;
  ObsNormalizer norm;

  struct Heads {
    nn::Matrix mean, log_std;  // act_dim x n; log_std already clamped
    nn::Matrix raw_log_std;
  };
  Heads heads(const nn::Matrix& obs_n, nn::Mlp::Cache* cache = nullptr) const;
  /// Deterministic proto-actions tanh(mean) for raw observations.
  nn::Matrix deterministic(const nn::Matrix& obs) const;
  Eigen::VectorXd value(const nn::Matrix& obs) const;

  static constexpr double kLogStdMin = -5.0, kLogStdMax = 2.0;

 private:
  int obs_dim_ = 0, act_dim_ = 0;
};

struct ProtoSample {
  nn::Matrix u;    // pre-squash Gaussian sample
  nn::Matrix a_p;  // tanh(u), in [-1, 1]
  Eigen::VectorXd log_prob;  // of a_p, including the tanh change of variables
};

/// One sample per observation column. `deterministic` returns tanh(mean).
ProtoSample sample_proto(const Policy& policy, const nn::Matrix& obs, Rng& rng, bool deterministic = false);

/// Log-density of the squashed Gaussian at a_p in (-1, 1) (per column).
Eigen::VectorXd squashed_log_prob(const nn::Matrix& mean, const nn::Matrix& log_std, const nn::Matrix& a_p);

struct Gae {
  Eigen::VectorXd advantages, returns;
};

/// values has length T+1 (last entry bootstraps). No episode boundaries.
Gae gae_advantages(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values, double gamma, double lambda);
/// General form: next_values[t] bootstraps transition t, truncated[t] stops the
/// advantage recursion (timeout; the next state belongs to a new episode).
Gae gae_advantages(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values, const Eigen::VectorXd& next_values,
                   const std::vector<bool>& truncated, double gamma, double lambda);

/// Zero mean, unit (population) standard deviation.
Eigen::VectorXd normalize_advantages(const Eigen::VectorXd& adv);

struct PpoMinibatch {
  nn::Matrix obs_n;  // normalized observations
  nn::Matrix u;      // pre-squash actions taken
  Eigen::VectorXd old_log_prob;  // Gaussian part only (tanh term cancels in the ratio)
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

struct PpoLoss {
  double total = 0.0, policy = 0.0, value = 0.0, entropy = 0.0;
  double approx_kl = 0.0, clip_fraction = 0.0;
};

/// Clipped surrogate + value loss - entropy bonus, mean over the minibatch.
/// Writes the gradient w.r.t. [actor params, critic params] when requested.
PpoLoss ppo_loss_and_grad(const Policy& policy, const PpoMinibatch& mb, const PpoConfig& cfg,
                          Eigen::VectorXd* grad = nullptr);

/// Gaussian log-density (pre-squash) of u, per column.
Eigen::VectorXd gaussian_log_prob(const nn::Matrix& mean, const nn::Matrix& log_std, const nn::Matrix& u);

struct PpoStats {
  long step = 0;
  double mean_reward = 0.0;          // per environment step over the batch
  double mean_episode_return = 0.0;  // episodes finished in this batch (NaN if none)
  PpoLoss loss;                      // averaged over the batch's minibatch updates
};

struct PpoResult {
  Policy policy;
  std::vector<PpoStats> stats;
};

/// Called after every update batch with the cumulative environment-step count.
using PpoHook = std::function<void(long step, const Policy&)>;

/// Vectorized PPO against `env`; every environment resets on timeout to a fresh
/// episode drawn from its own stream.
PpoResult train_ppo(const Env& env, const PpoConfig& cfg, std::uint64_t seed, const PpoHook& hook = {});

void save_policy(const Policy& policy, const std::filesystem::path& path, std::uint64_t seed = 0,
                 const std::string& model_hash = "");
Policy load_policy(const std::filesystem::path& path);

}  // namespace hammer
