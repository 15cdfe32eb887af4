#include "hammer/env.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace hammer {

RewardFlags RewardFlags::parse(const std::string& s) {
  RewardFlags f{false, false, false, false, false};
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "X")
      f.pose = true;
    else if (tok == "q")
      f.config = true;
    else if (tok == "eps")
      f.bonus = true;
    else if (tok == "a")
      f.action = true;
    else if (tok == "W")
      f.workspace = true;
    else
      throw ValidationError("unknown reward term '" + tok + "' (expected X, q, eps, a or W)");
  }
  if (!f.any()) throw ValidationError("reward flag set is empty");
  return f;
}

std::string RewardFlags::to_string() const {
  std::string out;
  auto add = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(pose, "X");
  add(config, "q");
  add(bonus, "eps");
  add(action, "a");
  add(workspace, "W");
  return out;
}

void RewardConfig::validate() const {
  for (double w : {lambda_p, lambda_r, lambda_q, lambda_a, lambda_w, w_x, w_alpha, w_q})
    require(w >= 0.0, "reward: weights must be >= 0");
  for (double e : {eps_p, eps_r, eps_p2, eps_r2, eps_alpha, eps_q}) require(e > 0.0, "reward: thresholds must be > 0");
  require(flags.any(), "reward: at least one term must be enabled");
}

double RewardConfig::upper_bound() const { return flags.bonus ? 2.0 * w_x + w_alpha + w_q : 0.0; }

RewardBreakdown reward(const RewardConfig& cfg, const JointConfig& q, const Pose& pose, const JointConfig& q_target,
                       const Pose& target, const DiscreteAction& a, const DiscreteAction& a_prev, bool inside) {
  RewardBreakdown r;
  const double d = euclidean_distance(pose.p, target.p);
  const double dg = geodesic_distance(pose.r, target.r);
  if (cfg.flags.pose) r.pose = -cfg.lambda_p * d - cfg.lambda_r * dg;
  if (cfg.flags.config) r.config = -cfg.lambda_q * (q - q_target).norm();
  if (cfg.flags.bonus) {
    const auto bx = [&](double ep, double er) { return (d < ep && dg < er) ? 1.0 : 0.0; };
    const YawPitch cur = yaw_pitch(pose.r), tgt = yaw_pitch(target.r);
    const double dyaw = wrap_angle(cur.yaw - tgt.yaw), dpitch = wrap_angle(cur.pitch - tgt.pitch);
    const double ba = (dyaw * dyaw < cfg.eps_alpha && dpitch * dpitch < cfg.eps_alpha) ? 1.0 : 0.0;
    const double bq = ((q - q_target).array().square() < cfg.eps_q).all() ? 1.0 : 0.0;
    r.bonus = cfg.w_x * (bx(cfg.eps_p, cfg.eps_r) + bx(cfg.eps_p2, cfg.eps_r2)) + cfg.w_alpha * ba + cfg.w_q * bq;
  }
  if (cfg.flags.action) r.action = -cfg.lambda_a * 0.25 * (a.as_vector() - a_prev.as_vector()).cwiseAbs().sum();
  if (cfg.flags.workspace && !inside) r.workspace = -cfg.lambda_w;
  return r;
}

// ------------------------------------------------------------------ episodes

void EnvConfig::validate() const {
  chain.validate();
  ws.validate();
  reward.validate();
  tracker.validate();
  require(t_reset >= 1, "env: t_reset must be >= 1");
  require(action_repeat >= 1, "env: action_repeat must be >= 1");
}

EpisodeSpec sample_episode(const EnvConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  EpisodeSpec ep;
  ep.seed = seed;
  ep.q_init = sample_config(cfg.ws, cfg.chain, rng, Region::Full);
  ep.q_target = sample_config(cfg.ws, cfg.chain, rng, Region::Target);
  return ep;
}

std::vector<EpisodeSpec> make_episode_list(const EnvConfig& cfg, int n, std::uint64_t seed) {
  require(n >= 1, "episode list: n must be >= 1");
  std::vector<EpisodeSpec> out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) out.push_back(sample_episode(cfg, derive_seed(seed, std::uint64_t(i))));
  return out;
}

namespace {

nlohmann::json vec_json(const JointVec& v) { return {v[0], v[1], v[2], v[3]}; }

JointVec json_vec(const nlohmann::json& j) {
  require(j.is_array() && j.size() == 4, "episode list: expected a 4-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace

void save_episode_list(const std::vector<EpisodeSpec>& eps, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : eps) j.push_back({{"seed", e.seed}, {"q_init", vec_json(e.q_init)}, {"q_target", vec_json(e.q_target)}});
  std::ofstream f(path);
  if (!f) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  f << j.dump(1) << '\n';
}

std::vector<EpisodeSpec> load_episode_list(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("episode list not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  std::vector<EpisodeSpec> out;
  for (const auto& e : j)
    out.push_back({e.at("seed").get<std::uint64_t>(), json_vec(e.at("q_init")), json_vec(e.at("q_target"))});
  return out;
}

std::string to_string(Backend b) { return b == Backend::Model ? "model" : "plant"; }

Backend parse_backend(const std::string& s) {
  if (s == "model") return Backend::Model;
  if (s == "plant") return Backend::Plant;
  throw ValidationError("unknown backend '" + s + "' (expected model or plant)");
}

// ------------------------------------------------------------------ Env

Env::Env(EnvConfig cfg, const DynModel& model, const Plant* plant) : cfg_(std::move(cfg)), model_(&model), plant_(plant) {
  cfg_.validate();
  require(std::abs(model.spec().dt - kControlDt) < 1e-12, "env: model dt must match the 20 Hz control rate");
  if (plant_) require(std::abs(plant_->params().dt - kControlDt) < 1e-12, "env: plant dt must match the 20 Hz control rate");
  require(obs_dim() == state_vector_dim(model.spec().lags) + 22, "env: observation layout mismatch");
}

void Env::reset(EnvState& s, const EpisodeSpec& ep) const {
  s.episode = ep;
  s.target = forward_kinematics(cfg_.chain, ep.q_target);
  s.window = LagWindow::at_rest(model_->spec().lags, model_->spec().prediction, ep.q_init);
  s.plant = PlantState::at_rest(ep.q_init);
  s.tracker = LoopTracker(cfg_.tracker);
  s.tracker.update(ep.q_init);
  s.noise = make_rng(ep.seed, 0x9E11);
  s.pose = forward_kinematics(cfg_.chain, ep.q_init);
  s.last_action = DiscreteAction::zero();
  s.t = 0;
}

void Env::observe(const EnvState& s, Eigen::Ref<Eigen::VectorXd> obs) const {
  const int n = model_->spec().input_dim();
  model_->write_state_vector(s.window, obs.head(n));
  auto put_pose = [&](int at, const Pose& p) {
    obs.segment<3>(at) = p.p;
    obs[at + 3] = p.r.w();
    obs[at + 4] = p.r.x();
    obs[at + 5] = p.r.y();
    obs[at + 6] = p.r.z();
  };
  put_pose(n, s.pose);
  obs.segment<4>(n + 7) = model_->normalize_config(s.window.q);
  put_pose(n + 11, s.target);
  obs.segment<4>(n + 18) = model_->normalize_config(s.episode.q_target);
}

Eigen::VectorXd Env::observe(const EnvState& s) const {
  Eigen::VectorXd obs(obs_dim());
  observe(s, obs);
  return obs;
}

void Env::tick_plant(EnvState& s, const DiscreteAction& a) const {
  s.plant = plant_->step(s.plant, a, s.noise);
  const JointVel v_est = s.tracker.update(s.plant.q);
  s.window.push_action(a);
  s.window.push_state(model_->spec().prediction, s.plant.q, v_est);
}

void Env::record_tick(EnvState& s, const DiscreteAction& a, StepResult& r) const {
  s.pose = forward_kinematics(cfg_.chain, s.window.q);
  const bool inside = in_workspace(cfg_.ws, s.pose);
  if (!inside) ++r.breaches;
  if (s.recorder) s.recorder->push_back({s.window.q, s.pose, a, inside});
}

StepResult Env::finish_step(EnvState& s, const DiscreteAction& a, int breaches) const {
  StepResult r;
  r.breaches = breaches;
  const bool inside = in_workspace(cfg_.ws, s.pose);
  r.reward = reward(cfg_.reward, s.window.q, s.pose, s.episode.q_target, s.target, a, s.last_action, inside);
  s.last_action = a;
  ++s.t;
  return r;
}

StepResult Env::step(EnvState& s, const DiscreteAction& a) const {
  EnvState* p = &s;
  StepResult r;
  step_batch(std::span<EnvState* const>(&p, 1), std::span<const DiscreteAction>(&a, 1), std::span<StepResult>(&r, 1));
  return r;
}

void Env::step_batch(std::span<EnvState* const> states, std::span<const DiscreteAction> actions,
                     std::span<StepResult> out) const {
  require(states.size() == actions.size() && states.size() == out.size(), "env: batch sizes differ");
  for (const auto& a : actions) require(a.valid(), "env: action components must be in {-1, 0, 1}");
  const std::size_t n = states.size();
  std::vector<StepResult> tick(n);
  std::vector<LagWindow*> windows(n);
  for (std::size_t i = 0; i < n; ++i) windows[i] = &states[i]->window;

  for (int k = 0; k < cfg_.action_repeat; ++k) {
    if (plant_) {
      for (std::size_t i = 0; i < n; ++i) tick_plant(*states[i], actions[i]);
    } else {
      model_->advance_batch(windows, actions);
    }
    for (std::size_t i = 0; i < n; ++i) record_tick(*states[i], actions[i], tick[i]);
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = finish_step(*states[i], actions[i], tick[i].breaches);
}

void Env::set_target(EnvState& s, const JointConfig& q_target) const {
  s.episode.q_target = q_target;
  s.target = forward_kinematics(cfg_.chain, q_target);
  s.t = 0;
}

void Env::teleport(EnvState& s, const JointConfig& q) const {
  s.window = LagWindow::at_rest(model_->spec().lags, model_->spec().prediction, q);
  s.plant = PlantState::at_rest(q);
  s.tracker = LoopTracker(cfg_.tracker);
  s.tracker.update(q);
  StepResult dummy;
  record_tick(s, DiscreteAction::zero(), dummy);
}

}  // namespace hammer
