#include "hammer/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace hammer {

double EpisodeLog::total_return() const {
  double s = 0.0;
  for (const auto& r : rewards) s += r.total();
  return s;
}

namespace {

double pitch_error(const Pose& pose, const Pose& target) {
  return std::abs(wrap_angle(yaw_pitch(pose.r).pitch - yaw_pitch(target.r).pitch));
}

}  // namespace

long first_success_tick(const EpisodeLog& log, double eps_p, double eps_alpha) {
  for (std::size_t t = 0; t < log.ticks.size(); ++t) {
    const Pose& p = log.ticks[t].pose;
    if (euclidean_distance(p.p, log.target.p) < eps_p && pitch_error(p, log.target) < eps_alpha) return long(t);
  }
  return -1;
}

bool success(const EpisodeLog& log, double eps_p, double eps_alpha) {
  return first_success_tick(log, eps_p, eps_alpha) >= 0;
}

WorkspaceRates workspace_rates(std::span<const EpisodeLog> logs, const Workspace& ws) {
  WorkspaceRates r;
  if (logs.empty()) return r;
  r.min_z = std::numeric_limits<double>::infinity();
  int oow = 0, ooz = 0;
  for (const auto& log : logs) {
    bool out = false, below = false;
    for (const auto& t : log.ticks) {
      out |= !t.inside;
      below |= t.pose.p.z() < ws.z_min;
      r.min_z = std::min(r.min_z, t.pose.p.z());
    }
    oow += out;
    ooz += below;
  }
  r.oow = double(oow) / double(logs.size());
  r.ooz = double(ooz) / double(logs.size());
  return r;
}

double path_length(const EpisodeLog& log, double eps_p, double eps_alpha) {
  const long hit = first_success_tick(log, eps_p, eps_alpha);
  const std::size_t end = hit >= 0 ? std::size_t(hit) : (log.ticks.empty() ? 0 : log.ticks.size() - 1);
  double s = 0.0;
  for (std::size_t t = 0; t < end; ++t) s += (log.ticks[t + 1].pose.p - log.ticks[t].pose.p).norm();
  return s;
}

std::vector<double> sr_grid_position() {
  std::vector<double> g;
  for (int i = 1; i <= 17; ++i) g.push_back(0.02 * i);
  return g;
}

std::vector<double> sr_grid_pitch() {
  std::vector<double> g;
  for (int i = 1; i <= 8; ++i) g.push_back(0.02 * i);
  return g;
}

double MetricsReport::sr_at(double eps_p, double eps_alpha) const {
  const auto gp = sr_grid_position(), ga = sr_grid_pitch();
  for (std::size_t i = 0; i < gp.size(); ++i)
    for (std::size_t j = 0; j < ga.size(); ++j)
      if (std::abs(gp[i] - eps_p) < 1e-9 && std::abs(ga[j] - eps_alpha) < 1e-9) return sr(Eigen::Index(i), Eigen::Index(j));
  throw ValidationError("sr_at: thresholds are not on the report grid");
}

MetricsReport compute_metrics(std::span<const EpisodeLog> logs, const Workspace& ws) {
  const auto gp = sr_grid_position(), ga = sr_grid_pitch();
  MetricsReport r;
  r.episodes = int(logs.size());
  r.sr = Eigen::MatrixXd::Zero(Eigen::Index(gp.size()), Eigen::Index(ga.size()));
  if (logs.empty()) return r;
  r.controller = logs[0].controller;
  r.backend = logs[0].backend;

  for (const auto& log : logs) {
    // Closest approach in position among ticks within each pitch threshold.
    std::vector<double> best(ga.size(), std::numeric_limits<double>::infinity());
    for (const auto& t : log.ticks) {
      const double d = euclidean_distance(t.pose.p, log.target.p);
      const double e = pitch_error(t.pose, log.target);
      for (std::size_t j = 0; j < ga.size(); ++j)
        if (e < ga[j]) best[j] = std::min(best[j], d);
    }
    for (std::size_t i = 0; i < gp.size(); ++i)
      for (std::size_t j = 0; j < ga.size(); ++j)
        if (best[j] < gp[i]) r.sr(Eigen::Index(i), Eigen::Index(j)) += 1.0;

    EpisodeMetrics m;
    m.seed = log.seed;
    m.ret = log.total_return();
    m.success_002 = success(log, 0.02, 0.02);
    m.success_004 = success(log, 0.04, 0.04);
    m.min_z = std::numeric_limits<double>::infinity();
    for (const auto& t : log.ticks) {
      m.out_of_workspace |= !t.inside;
      m.below_z |= t.pose.p.z() < ws.z_min;
      m.min_z = std::min(m.min_z, t.pose.p.z());
    }
    m.path_length = path_length(log);
    r.per_episode.push_back(m);
    r.avg_return += m.ret;
    r.eef_pl += m.path_length;
  }
  const double n = double(logs.size());
  r.sr /= n;
  r.avg_return /= n;
  r.eef_pl /= n;
  const auto w = workspace_rates(logs, ws);
  r.oow = w.oow;
  r.ooz = w.ooz;
  r.min_z = w.min_z;
  return r;
}

std::string sr_csv(const Eigen::MatrixXd& sr) {
  const auto gp = sr_grid_position(), ga = sr_grid_pitch();
  std::ostringstream os;
  char buf[64];
  os << "eps_p";
  for (double a : ga) {
    std::snprintf(buf, sizeof buf, ",%.2f", a);
    os << buf;
  }
  os << '\n';
  for (Eigen::Index i = 0; i < sr.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f", gp[std::size_t(i)]);
    os << buf;
    for (Eigen::Index j = 0; j < sr.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.4f", sr(i, j));
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::string report_json(const MetricsReport& r) {
  nlohmann::json j;
  j["controller"] = r.controller;
  j["backend"] = r.backend;
  j["protocol"] = r.protocol;
  j["episodes"] = r.episodes;
  j["avg_return"] = r.avg_return;
  j["sr_0.02_0.02"] = r.episodes ? r.sr_at(0.02, 0.02) : 0.0;
  j["sr_0.04_0.04"] = r.episodes ? r.sr_at(0.04, 0.04) : 0.0;
  j["sr_0.12_0.08"] = r.episodes ? r.sr_at(0.12, 0.08) : 0.0;
  j["oow"] = r.oow;
  j["ooz"] = r.ooz;
  j["min_z"] = r.min_z;
  j["eef_pl"] = r.eef_pl;
  j["plan_calls"] = r.plan_calls;
  j["mean_plan_ms"] = r.mean_plan_ms;
  j["sr_eps_p"] = sr_grid_position();
  j["sr_eps_alpha"] = sr_grid_pitch();
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.sr.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < r.sr.cols(); ++k) row.push_back(r.sr(i, k));
    rows.push_back(row);
  }
  j["sr"] = rows;
  return j.dump(1);
}

void write_report(const MetricsReport& r, const std::filesystem::path& prefix) {
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw RuntimeFailure("cannot open " + p.string() + " for writing");
    return f;
  };
  {
    auto f = open(prefix.string() + ".json");
    f << report_json(r) << '\n';
  }
  {
    auto f = open(prefix.string() + "_sr.csv");
    f << sr_csv(r.sr);
  }
  auto f = open(prefix.string() + "_episodes.csv");
  f << "seed,return,success_0.02_0.02,success_0.04_0.04,oow,ooz,min_z,path_length\n";
  char buf[256];
  for (const auto& m : r.per_episode) {
    std::snprintf(buf, sizeof buf, "%llu,%.10g,%d,%d,%d,%d,%.10g,%.10g\n", static_cast<unsigned long long>(m.seed),
                  m.ret, int(m.success_002), int(m.success_004), int(m.out_of_workspace), int(m.below_z), m.min_z,
                  m.path_length);
    f << buf;
  }
}

Eigen::MatrixXd sr_gap(const MetricsReport& model, const MetricsReport& plant) {
  require(model.sr.rows() == plant.sr.rows() && model.sr.cols() == plant.sr.cols(), "sr_gap: grid mismatch");
  return plant.sr - model.sr;
}

// ------------------------------------------------------------------ controllers

void NullController::act(const Env&, std::span<EnvState* const>, std::span<DiscreteAction> out) {
  std::fill(out.begin(), out.end(), DiscreteAction::zero());
}

void OracleController::begin(int, const Env& env, EnvState& s) { env.teleport(s, s.episode.q_target); }

void OracleController::act(const Env&, std::span<EnvState* const>, std::span<DiscreteAction> out) {
  std::fill(out.begin(), out.end(), DiscreteAction::zero());
}

void PpoController::act(const Env& env, std::span<EnvState* const> states, std::span<DiscreteAction> out) {
  Eigen::MatrixXd obs(env.obs_dim(), Eigen::Index(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) env.observe(*states[i], obs.col(Eigen::Index(i)));
  const Eigen::MatrixXd a = policy_->deterministic(obs);
  for (std::size_t i = 0; i < states.size(); ++i) out[i] = discretize(a.col(Eigen::Index(i)));
}

IcemController::IcemController(const DynModel& model, const EnvConfig& env_cfg, IcemConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), backend_(model, env_cfg, cfg_.flags, cfg_.action_repeat), seed_(seed) {
  cfg_.validate();
}

void IcemController::begin(int slot, const Env&, EnvState& s) {
  const auto k = std::size_t(slot);
  if (planners_.size() <= k) {
    planners_.resize(k + 1);
    rngs_.resize(k + 1);
  }
  planners_[k] = initial_planner_state(cfg_, kJoints);
  rngs_[k] = make_rng(seed_, s.episode.seed);
}

void IcemController::act(const Env&, std::span<EnvState* const> states, std::span<DiscreteAction> out) {
  require(planners_.size() >= states.size(), "icem controller: begin() was not called for every slot");
  for (std::size_t i = 0; i < states.size(); ++i) {
    const EnvState& s = *states[i];
    backend_.set_snapshot(s.window, s.episode.q_target, s.last_action);
    const PlanResult r = plan(backend_, planners_[i], cfg_, rngs_[i]);
    if (diag_) write_plan_diagnostics(*diag_, calls_, r.diag, calls_ == 0);
    ++calls_;
    total_ms_ += r.diag.elapsed_ms;
    out[i] = r.action;
  }
}

// ------------------------------------------------------------------ studies

std::string to_string(Protocol p) { return p == Protocol::Fixed ? "fixed" : "sequential"; }

Protocol parse_protocol(const std::string& s) {
  if (s == "fixed") return Protocol::Fixed;
  if (s == "sequential") return Protocol::Sequential;
  throw ValidationError("unknown protocol '" + s + "' (expected fixed or sequential)");
}

std::vector<EpisodeLog> run_episodes(const Env& env, Controller& controller, const std::vector<EpisodeSpec>& episodes,
                                     const StudyConfig& cfg) {
  require(!episodes.empty(), "study: empty episode list");
  require(cfg.lockstep >= 1 && cfg.sequential_targets >= 1, "study: lockstep and sequential_targets must be >= 1");
  const int t_reset = env.config().t_reset;
  const std::string backend = to_string(env.backend());

  auto start_log = [&](EpisodeLog& log, const EpisodeSpec& ep) {
    log.seed = ep.seed;
    log.q_target = ep.q_target;
    log.target = forward_kinematics(env.config().chain, ep.q_target);
    log.backend = backend;
    log.controller = controller.name();
    log.ticks.reserve(std::size_t(t_reset * env.config().action_repeat) + 1);
    log.rewards.reserve(std::size_t(t_reset));
  };

  std::vector<EpisodeLog> logs;
  if (cfg.protocol == Protocol::Fixed) {
    logs.resize(episodes.size());
    for (std::size_t start = 0; start < episodes.size(); start += std::size_t(cfg.lockstep)) {
      const std::size_t m = std::min(std::size_t(cfg.lockstep), episodes.size() - start);
      std::vector<EnvState> states(m);
      std::vector<EnvState*> ptr(m);
      std::vector<DiscreteAction> act(m);
      std::vector<StepResult> res(m);
      for (std::size_t i = 0; i < m; ++i) {
        EpisodeLog& log = logs[start + i];
        start_log(log, episodes[start + i]);
        env.reset(states[i], episodes[start + i]);
        states[i].recorder = &log.ticks;
        ptr[i] = &states[i];
        controller.begin(int(i), env, states[i]);
      }
      for (int t = 0; t < t_reset; ++t) {
        controller.act(env, ptr, act);
        env.step_batch(ptr, act, res);
        for (std::size_t i = 0; i < m; ++i) logs[start + i].rewards.push_back(res[i].reward);
      }
    }
  } else {
    const std::size_t n = std::min(episodes.size(), std::size_t(cfg.sequential_targets));
    logs.resize(n);
    EnvState s;
    env.reset(s, episodes[0]);
    EnvState* ptr[1] = {&s};
    DiscreteAction act[1];
    StepResult res[1];
    for (std::size_t i = 0; i < n; ++i) {
      EpisodeLog& log = logs[i];
      start_log(log, episodes[i]);
      if (i > 0) env.set_target(s, episodes[i].q_target);
      s.episode.seed = episodes[i].seed;
      s.recorder = &log.ticks;
      controller.begin(0, env, s);
      for (int t = 0; t < t_reset; ++t) {
        controller.act(env, ptr, act);
        env.step_batch(ptr, act, res);
        log.rewards.push_back(res[0].reward);
      }
    }
  }
  return logs;
}

MetricsReport run_study(const Env& env, Controller& controller, const std::vector<EpisodeSpec>& episodes,
                        const StudyConfig& cfg) {
  const auto logs = run_episodes(env, controller, episodes, cfg);
  MetricsReport r = compute_metrics(logs, env.config().ws);
  r.protocol = to_string(cfg.protocol);
  r.plan_calls = controller.plan_calls();
  r.mean_plan_ms = controller.mean_plan_ms();
  return r;
}

std::vector<AggregateRow> aggregate_reports(std::span<const MetricsReport> reports) {
  require(!reports.empty(), "aggregate: no reports");
  std::vector<std::pair<std::string, std::vector<double>>> cols = {
      {"avg_return", {}}, {"sr_0.02_0.02", {}}, {"sr_0.04_0.04", {}}, {"oow", {}},
      {"ooz", {}},        {"min_z", {}},        {"eef_pl", {}}};
  for (const auto& r : reports) {
    cols[0].second.push_back(r.avg_return);
    cols[1].second.push_back(r.sr_at(0.02, 0.02));
    cols[2].second.push_back(r.sr_at(0.04, 0.04));
    cols[3].second.push_back(r.oow);
    cols[4].second.push_back(r.ooz);
    cols[5].second.push_back(r.min_z);
    cols[6].second.push_back(r.eef_pl);
  }
  std::vector<AggregateRow> out;
  for (const auto& [name, v] : cols) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= double(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    out.push_back({name, m, std::sqrt(var / double(v.size()))});
  }
  return out;
}

}  // namespace hammer
