#include "hammer/pipeline.hpp"

#include <cmath>
#include <sstream>

namespace hammer {

ExciteResult record_session(const Plant& plant, const Workspace& ws, ExciteConfig cfg, double minutes,
                            std::uint64_t seed) {
  require(minutes > 0.0, "minutes must be > 0");
  cfg.steps = std::lround(minutes * 60.0 / plant.params().dt);
  Rng rng = make_rng(seed, 0xDA7A);
  return excite(plant, ws, cfg, rng);
}

std::pair<Dataset, Dataset> holdout_tail(const Dataset& data, double minutes) {
  require(!data.trajectories.empty(), "holdout: empty dataset");
  Dataset train = data, held;
  if (minutes <= 0.0) return {train, held};
  Trajectory& last = train.trajectories.back();
  const auto n = std::size_t(std::lround(minutes * 60.0 / kControlDt));
  require(n < last.size(), "holdout: last trajectory is shorter than the held-out span");
  const auto cut = last.size() - n;
  Trajectory tail;
  tail.q.assign(last.q.begin() + long(cut), last.q.end());
  tail.a.assign(last.a.begin() + long(cut), last.a.end());
  if (last.qd.size() == last.size()) tail.qd.assign(last.qd.begin() + long(cut), last.qd.end());
  last.q.resize(cut);
  last.a.resize(cut);
  if (last.qd.size() > cut) last.qd.resize(cut);
  held.trajectories.push_back(std::move(tail));
  return {train, held};
}

JointVec open_loop_rms(const DynModel& model, const Dataset& data, int count, int horizon, std::uint64_t seed) {
  const int k = model.spec().lags;
  const bool velocity = model.spec().prediction == Prediction::DeltaQd;
  Rng rng = make_rng(seed, 0x0B1);
  const auto subs = sample_subtrajectories(data, k, horizon, count, rng);
  JointVec sq = JointVec::Zero();
  long n = 0;
  for (const auto& s : subs) {
    const Trajectory& tr = *s.traj;
    LagWindow w = LagWindow::at_rest(k, model.spec().prediction, tr.q[std::size_t(s.start)]);
    for (int slot = 0; slot <= k; ++slot) {
      const auto idx = std::size_t(s.start - k + slot);
      w.states[std::size_t(slot)] = velocity ? tr.qd[idx] : tr.q[idx];
      if (slot > 0) w.actions[std::size_t(slot)] = tr.a[idx - 1].as_vector();
    }
    if (velocity) w.v = tr.qd[std::size_t(s.start)];
    const std::span<const DiscreteAction> acts(tr.a.data() + s.start, std::size_t(horizon));
    const auto pred = rollout(model, w, acts);
    for (int j = 0; j < horizon; ++j) {
      const JointVec e = pred[std::size_t(j)] - tr.q[std::size_t(s.start + j + 1)];
      sq += e.cwiseProduct(e);
      ++n;
    }
  }
  return (sq / double(n)).cwiseSqrt();
}

std::vector<RewardFlags> ablation_flag_sets() {
  const char* rows[] = {"X", "q", "X,eps", "q,eps", "X,q", "X,q,eps", "X,q,eps,a", "X,q,a,W", "X,q,eps,a,W"};
  std::vector<RewardFlags> out;
  for (const char* r : rows) out.push_back(RewardFlags::parse(r));
  return out;
}

double AblationRow::mean(const std::string& metric) const {
  for (const auto& m : metrics)
    if (m.metric == metric) return m.mean;
  throw ValidationError("ablation: unknown metric " + metric);
}

std::vector<AblationRow> run_ablation(const EnvConfig& env_cfg, const DynModel& model, const PpoConfig& ppo,
                                      const std::vector<RewardFlags>& flag_sets, const std::vector<std::uint64_t>& seeds,
                                      const std::vector<EpisodeSpec>& episodes, const StudyConfig& study,
                                      const AblationProgress& progress) {
  require(!flag_sets.empty(), "ablation: no reward configurations");
  require(!seeds.empty(), "ablation: no seeds");
  std::vector<AblationRow> rows;
  for (const auto& flags : flag_sets) {
    require(flags.any(), "ablation: empty reward configuration");
    EnvConfig cfg = env_cfg;
    cfg.reward.flags = flags;
    const Env env(cfg, model);
    AblationRow row;
    row.flags = flags;
    for (auto seed : seeds) {
      const PpoResult trained = train_ppo(env, ppo, seed);
      PpoController ctl(trained.policy);
      AblationRun run{flags, seed, run_study(env, ctl, episodes, study)};
      if (progress) progress(run);
      row.per_seed.push_back(std::move(run.report));
    }
    row.metrics = aggregate_reports(row.per_seed);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "reward";
  if (!rows.empty())
    for (const auto& m : rows[0].metrics) os << ',' << m.metric << "_mean," << m.metric << "_std";
  os << '\n';
  char buf[64];
  for (const auto& r : rows) {
    os << '"' << r.flags.to_string() << '"';
    for (const auto& m : r.metrics) {
      std::snprintf(buf, sizeof buf, ",%.6g,%.6g", m.mean, m.std);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace hammer
