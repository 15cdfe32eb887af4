#pragma once

#include "hammer/config.hpp"

#include <functional>

namespace hammer {

/// One scripted recording of `minutes` at the control rate.
ExciteResult record_session(const Plant& plant, const Workspace& ws, ExciteConfig cfg, double minutes,
                            std::uint64_t seed);

/// Moves the last `minutes` of the final trajectory into a held-out set.
std::pair<Dataset, Dataset> holdout_tail(const Dataset& data, double minutes);

/// Open-loop per-joint RMS error (rad) over `count` seed-determined windows of
/// `horizon` ticks.
JointVec open_loop_rms(const DynModel& model, const Dataset& data, int count, int horizon, std::uint64_t seed);

/// The nine reward-term subsets of the ablation table.
std::vector<RewardFlags> ablation_flag_sets();

struct AblationRun {
  RewardFlags flags;
  std::uint64_t seed = 0;
  MetricsReport report;
};

struct AblationRow {
  RewardFlags flags;
  std::vector<AggregateRow> metrics;  // aggregate_reports order
  std::vector<MetricsReport> per_seed;

  double mean(const std::string& metric) const;
};

using AblationProgress = std::function<void(const AblationRun&)>;

/// Trains one policy per (flag set, seed) on the model backend with that reward
/// and evaluates it on the shared episode list under the same reward.
std::vector<AblationRow> run_ablation(const EnvConfig& env_cfg, const DynModel& model, const PpoConfig& ppo,
                                      const std::vector<RewardFlags>& flag_sets, const std::vector<std::uint64_t>& seeds,
                                      const std::vector<EpisodeSpec>& episodes, const StudyConfig& study,
                                      const AblationProgress& progress = {});

/// One line per flag set: flags, then mean and std of every aggregate metric.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace hammer
