#include "hammer/ppo.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

namespace hammer {

using nn::Matrix;
using Eigen::VectorXd;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 log(2 pi)

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log(1 - tanh(u)^2), stable for large |u|.
inline double log1m_tanh2(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

}  // namespace

DiscreteAction discretize(const Eigen::Ref<const VectorXd>& a_p) {
  require(a_p.size() == kJoints, "discretize: expected a 4-vector");
  DiscreteAction a;
  for (int j = 0; j < kJoints; ++j) a[j] = a_p[j] < -0.5 ? -1 : (a_p[j] > 0.5 ? 1 : 0);
  return a;
}

void PpoConfig::validate() const {
  require(lr > 0.0, "ppo: lr must be > 0");
  require(gamma > 0.0 && gamma <= 1.0, "ppo: gamma must be in (0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "ppo: gae_lambda must be in [0, 1]");
  require(clip > 0.0 && clip < 1.0, "ppo: clip must be in (0, 1)");
  require(value_cost > 0.0, "ppo: value_cost must be > 0");
  require(unroll >= 1 && batch >= 1 && minibatches >= 1 && num_envs >= 1 && updates_per_batch >= 1,
          "ppo: unroll, batch, minibatches, num_envs and updates_per_batch must be >= 1");
  require(batch % num_envs == 0, "ppo: batch (unrolls) must be a multiple of num_envs");
  require(steps_per_batch() % minibatches == 0, "ppo: batch * unroll must be divisible by minibatches");
  require(total_steps >= 1, "ppo: total_steps must be >= 1");
  for (int h : actor_hidden) require(h > 0, "ppo: actor widths must be > 0");
  for (int h : critic_hidden) require(h > 0, "ppo: critic widths must be > 0");
}

// ------------------------------------------------------------------ normalizer

void ObsNormalizer::update(const Matrix& obs) {
  require(obs.rows() == mean.size(), "normalizer: dimension mismatch");
  const double nb = double(obs.cols());
  if (nb == 0) return;
  const VectorXd mb = obs.rowwise().mean();
  const VectorXd m2b = (obs.colwise() - mb).array().square().rowwise().sum();
  const VectorXd delta = mb - mean;
  const double tot = count + nb;
  mean += delta * (nb / tot);
  m2 += m2b + delta.cwiseAbs2() * (count * nb / tot);
  count = tot;
}

VectorXd ObsNormalizer::stddev() const {
  if (count < 2.0) return VectorXd::Ones(mean.size());
  return (m2 / count).cwiseSqrt().cwiseMax(1e-6);
}

Matrix ObsNormalizer::apply(const Matrix& obs) const {
  const VectorXd inv = stddev().cwiseInverse();
  Matrix out = (obs.colwise() - mean).array().colwise() * inv.array();
  return out.cwiseMax(-clip).cwiseMin(clip);
}

// ------------------------------------------------------------------ policy

namespace {

std::vector<int> net_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

}  // namespace

Policy::Policy(int obs_dim, int act_dim, const std::vector<int>& actor_hidden, const std::vector<int>& critic_hidden)
    : actor(net_sizes(obs_dim, actor_hidden, 2 * act_dim)),
      critic(net_sizes(obs_dim, critic_hidden, 1)),
      norm(obs_dim),
      obs_dim_(obs_dim),
      act_dim_(act_dim) {}

void Policy::init(Rng& rng, double init_log_std) {
  actor.init(rng, 0.01);
  critic.init(rng, 1.0);
  actor.params().tail(act_dim_).setConstant(init_log_std);  // log-std half of the output bias
}

Policy::Heads Policy::heads(const Matrix& obs_n, nn::Mlp::Cache* cache) const {
  const Matrix out = actor.forward(obs_n, cache);
  Heads h;
  h.mean = out.topRows(act_dim_);
  h.raw_log_std = out.bottomRows(act_dim_);
  h.log_std = h.raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  return h;
}

Matrix Policy::deterministic(const Matrix& obs) const { return heads(norm.apply(obs)).mean.array().tanh(); }

VectorXd Policy::value(const Matrix& obs) const { return critic.forward(norm.apply(obs)).row(0).transpose(); }

VectorXd gaussian_log_prob(const Matrix& mean, const Matrix& log_std, const Matrix& u) {
  const Matrix z = (u - mean).array() / log_std.array().exp();
  return (-0.5 * z.array().square() - log_std.array() - kHalfLog2Pi).colwise().sum().transpose();
}

VectorXd squashed_log_prob(const Matrix& mean, const Matrix& log_std, const Matrix& a_p) {
  const Matrix u = a_p.array().atanh();
  VectorXd lp = gaussian_log_prob(mean, log_std, u);
  lp -= (1.0 - a_p.array().square()).log().matrix().colwise().sum().transpose();
  return lp;
}

ProtoSample sample_proto(const Policy& policy, const Matrix& obs, Rng& rng, bool deterministic) {
  const auto h = policy.heads(policy.norm.apply(obs));
  ProtoSample s;
  s.u = h.mean;
  if (!deterministic) {
    const Matrix std = h.log_std.array().exp();
    for (Eigen::Index c = 0; c < s.u.cols(); ++c)
      for (Eigen::Index r = 0; r < s.u.rows(); ++r) s.u(r, c) += std(r, c) * standard_normal(rng);
  }
  s.a_p = s.u.array().tanh();
  s.log_prob = gaussian_log_prob(h.mean, h.log_std, s.u);
  for (Eigen::Index c = 0; c < s.u.cols(); ++c)
    for (Eigen::Index r = 0; r < s.u.rows(); ++r) s.log_prob[c] -= log1m_tanh2(s.u(r, c));
  return s;
}

// ------------------------------------------------------------------ advantages

Gae gae_advantages(const VectorXd& rewards, const VectorXd& values, double gamma, double lambda) {
  const auto n = rewards.size();
  require(values.size() == n + 1, "gae: values must have one more entry than rewards");
  return gae_advantages(rewards, values.head(n), values.tail(n), std::vector<bool>(std::size_t(n), false), gamma,
                        lambda);
}

Gae gae_advantages(const VectorXd& rewards, const VectorXd& values, const VectorXd& next_values,
                   const std::vector<bool>& truncated, double gamma, double lambda) {
  const auto n = rewards.size();
  require(values.size() == n && next_values.size() == n && Eigen::Index(truncated.size()) == n,
          "gae: input lengths differ");
  Gae g;
  g.advantages.resize(n);
  double next_adv = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double delta = rewards[t] + gamma * next_values[t] - values[t];
    const bool cut = truncated[std::size_t(t)] || t == n - 1;
    next_adv = delta + (cut ? 0.0 : gamma * lambda * next_adv);
    g.advantages[t] = next_adv;
  }
  g.returns = g.advantages + values;
  return g;
}

VectorXd normalize_advantages(const VectorXd& adv) {
  if (adv.size() == 0) return adv;
  const double m = adv.mean();
  const double sd = std::sqrt((adv.array() - m).square().mean());
  return (adv.array() - m) / (sd + 1e-8);
}

// ------------------------------------------------------------------ loss

PpoLoss ppo_loss_and_grad(const Policy& policy, const PpoMinibatch& mb, const PpoConfig& cfg, VectorXd* grad) {
  const Eigen::Index m = mb.obs_n.cols();
  const int a_dim = policy.act_dim();
  require(m > 0, "ppo loss: empty minibatch");
  nn::Mlp::Cache ac, cc;
  const auto h = policy.heads(mb.obs_n, grad ? &ac : nullptr);
  const VectorXd logp = gaussian_log_prob(h.mean, h.log_std, mb.u);
  const Matrix v = policy.critic.forward(mb.obs_n, grad ? &cc : nullptr);

  PpoLoss out;
  VectorXd g_logp(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double log_ratio = logp[i] - mb.old_log_prob[i];
    const double r = std::exp(log_ratio);
    const double a = mb.advantages[i];
    const double s1 = r * a;
    const double s2 = std::clamp(r, 1.0 - cfg.clip, 1.0 + cfg.clip) * a;
    out.policy -= std::min(s1, s2);
    g_logp[i] = s1 <= s2 ? s1 : 0.0;
    out.approx_kl += (r - 1.0) - log_ratio;
    if (std::abs(r - 1.0) > cfg.clip) out.clip_fraction += 1.0;
  }
  const double inv_m = 1.0 / double(m);
  out.policy *= inv_m;
  out.approx_kl *= inv_m;
  out.clip_fraction *= inv_m;
  out.entropy = (h.log_std.array() + 0.5 + kHalfLog2Pi).sum() * inv_m;
  const VectorXd err = v.row(0).transpose() - mb.returns;
  out.value = cfg.value_cost * 0.5 * err.squaredNorm() * inv_m;
  out.total = out.policy + out.value - cfg.entropy_cost * out.entropy;
  if (!std::isfinite(out.total)) throw NonFiniteError("ppo loss is not finite", -1);

  if (grad) {
    const Eigen::Index na = policy.actor.num_params(), nc = policy.critic.num_params();
    grad->setZero(na + nc);
    Matrix d_out(2 * a_dim, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (int j = 0; j < a_dim; ++j) {
        const double sigma = std::exp(h.log_std(j, i));
        const double z = (mb.u(j, i) - h.mean(j, i)) / sigma;
        // -d/dtheta of the surrogate; logp' w.r.t. mean is z / sigma, w.r.t. log-std z^2 - 1.
        d_out(j, i) = -g_logp[i] * inv_m * z / sigma;
        const double raw = h.raw_log_std(j, i);
        const bool active = raw > Policy::kLogStdMin && raw < Policy::kLogStdMax;
        d_out(a_dim + j, i) = active ? (-g_logp[i] * (z * z - 1.0) - cfg.entropy_cost) * inv_m : 0.0;
      }
    }
    policy.actor.backward(ac, d_out, grad->head(na));
    const Matrix d_v = (cfg.value_cost * inv_m) * err.transpose();
    policy.critic.backward(cc, d_v, grad->tail(nc));
  }
  return out;
}

// ------------------------------------------------------------------ training

PpoResult train_ppo(const Env& env, const PpoConfig& cfg, std::uint64_t seed, const PpoHook& hook) {
  cfg.validate();
  const int n_env = cfg.num_envs, t_len = cfg.unroll, a_dim = kJoints;
  const int rounds = cfg.batch / n_env;
  const Eigen::Index per_round = Eigen::Index(n_env) * t_len;
  const Eigen::Index total = per_round * rounds;
  const int obs_dim = env.obs_dim();

  Rng init_rng = make_rng(seed, 0);
  Rng action_rng = make_rng(seed, 1);
  Rng shuffle_rng = make_rng(seed, 2);
  Policy policy(obs_dim, a_dim, cfg.actor_hidden, cfg.critic_hidden);
  policy.init(init_rng, cfg.init_log_std);
  nn::Adam actor_opt({.lr = cfg.lr}), critic_opt({.lr = cfg.lr});
  actor_opt.reset(policy.actor.num_params());
  critic_opt.reset(policy.critic.num_params());

  std::vector<EnvState> states(static_cast<std::size_t>(n_env));
  std::vector<Rng> episode_rng;
  std::vector<EnvState*> state_ptr;
  for (int i = 0; i < n_env; ++i) {
    episode_rng.push_back(make_rng(seed, 100 + std::uint64_t(i)));
    env.reset(states[std::size_t(i)], sample_episode(env.config(), episode_rng.back()()));
    state_ptr.push_back(&states[std::size_t(i)]);
  }
  std::vector<double> running_return(std::size_t(n_env), 0.0);

  // Batch storage, column index = (round * t_len + t) * n_env + env.
  Matrix obs_raw(obs_dim, total), u_all(a_dim, total);
  VectorXd logp_old(total), rewards(total);
  std::vector<bool> truncated(static_cast<std::size_t>(total));
  std::vector<Eigen::Index> next_col(static_cast<std::size_t>(total));  // column of the next observation in `extra` or obs_raw
  std::vector<bool> next_in_extra(static_cast<std::size_t>(total));
  Matrix extra(obs_dim, 0);  // final observations of truncated episodes and unroll bootstraps
  std::vector<DiscreteAction> actions(static_cast<std::size_t>(n_env));
  std::vector<StepResult> results(static_cast<std::size_t>(n_env));
  Matrix obs(obs_dim, n_env);

  PpoResult result;
  long steps = 0;
  while (steps < cfg.total_steps) {
    std::vector<VectorXd> extra_cols;
    double reward_sum = 0.0, finished_return = 0.0;
    int finished = 0;

    for (int rd = 0; rd < rounds; ++rd) {
      for (int t = 0; t < t_len; ++t) {
        for (int i = 0; i < n_env; ++i) env.observe(states[std::size_t(i)], obs.col(i));
        const ProtoSample s = sample_proto(policy, obs, action_rng);
        const auto h = policy.heads(policy.norm.apply(obs));
        const VectorXd lp = gaussian_log_prob(h.mean, h.log_std, s.u);
        for (int i = 0; i < n_env; ++i) actions[std::size_t(i)] = discretize(s.a_p.col(i));
        env.step_batch(state_ptr, actions, results);

        for (int i = 0; i < n_env; ++i) {
          const Eigen::Index col = (Eigen::Index(rd) * t_len + t) * n_env + i;
          const auto iu = std::size_t(i);
          obs_raw.col(col) = obs.col(i);
          u_all.col(col) = s.u.col(i);
          logp_old[col] = lp[i];
          const double r = results[iu].reward.total();
          rewards[col] = r;
          reward_sum += r;
          running_return[iu] += r;
          const bool done = states[iu].t >= env.config().t_reset;
          truncated[std::size_t(col)] = done;
          if (done || t == t_len - 1) {
            next_in_extra[std::size_t(col)] = true;
            next_col[std::size_t(col)] = Eigen::Index(extra_cols.size());
            extra_cols.push_back(env.observe(states[iu]));
          } else {
            next_in_extra[std::size_t(col)] = false;
            next_col[std::size_t(col)] = col + n_env;
          }
          if (done) {
            finished_return += running_return[iu];
            ++finished;
            running_return[iu] = 0.0;
            env.reset(states[iu], sample_episode(env.config(), episode_rng[iu]()));
          }
        }
      }
    }
    steps += total;

    extra.resize(obs_dim, Eigen::Index(extra_cols.size()));
    for (std::size_t c = 0; c < extra_cols.size(); ++c) extra.col(Eigen::Index(c)) = extra_cols[c];
    policy.norm.update(obs_raw);
    const Matrix obs_n = policy.norm.apply(obs_raw);
    const VectorXd values = policy.critic.forward(obs_n).row(0).transpose();
    const VectorXd extra_values = policy.value(extra);

    VectorXd advantages(total), returns(total);
    for (int rd = 0; rd < rounds; ++rd) {
      for (int i = 0; i < n_env; ++i) {
        VectorXd r(t_len), v(t_len), nv(t_len);
        std::vector<bool> tr(static_cast<std::size_t>(t_len));
        for (int t = 0; t < t_len; ++t) {
          const Eigen::Index col = (Eigen::Index(rd) * t_len + t) * n_env + i;
          r[t] = rewards[col];
          v[t] = values[col];
          nv[t] = next_in_extra[std::size_t(col)] ? extra_values[next_col[std::size_t(col)]]
                                                  : values[next_col[std::size_t(col)]];
          tr[std::size_t(t)] = truncated[std::size_t(col)];
        }
        const Gae g = gae_advantages(r, v, nv, tr, cfg.gamma, cfg.gae_lambda);
        for (int t = 0; t < t_len; ++t) {
          const Eigen::Index col = (Eigen::Index(rd) * t_len + t) * n_env + i;
          advantages[col] = g.advantages[t];
          returns[col] = g.returns[t];
        }
      }
    }
    advantages = normalize_advantages(advantages);

    PpoStats st;
    const Eigen::Index mb_size = total / cfg.minibatches;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(total));
    VectorXd g;
    for (int epoch = 0; epoch < cfg.updates_per_batch; ++epoch) {
      std::iota(perm.begin(), perm.end(), Eigen::Index(0));
      for (std::size_t k = perm.size() - 1; k > 0; --k)
        std::swap(perm[k], perm[std::size_t(uniform_int(shuffle_rng, 0, int(k)))]);
      for (int b = 0; b < cfg.minibatches; ++b) {
        PpoMinibatch mb;
        mb.obs_n.resize(obs_dim, mb_size);
        mb.u.resize(a_dim, mb_size);
        mb.old_log_prob.resize(mb_size);
        mb.advantages.resize(mb_size);
        mb.returns.resize(mb_size);
        for (Eigen::Index k = 0; k < mb_size; ++k) {
          const Eigen::Index c = perm[std::size_t(b * mb_size + k)];
          mb.obs_n.col(k) = obs_n.col(c);
          mb.u.col(k) = u_all.col(c);
          mb.old_log_prob[k] = logp_old[c];
          mb.advantages[k] = advantages[c];
          mb.returns[k] = returns[c];
        }
        const PpoLoss l = ppo_loss_and_grad(policy, mb, cfg, &g);
        if (!g.allFinite()) throw NonFiniteError("ppo gradient is not finite", steps);
        VectorXd ga = g.head(policy.actor.num_params()), gc = g.tail(policy.critic.num_params());
        actor_opt.step(policy.actor.params(), ga);
        critic_opt.step(policy.critic.params(), gc);
        st.loss.total += l.total;
        st.loss.policy += l.policy;
        st.loss.value += l.value;
        st.loss.entropy += l.entropy;
        st.loss.approx_kl += l.approx_kl;
        st.loss.clip_fraction += l.clip_fraction;
      }
    }
    const double n_updates = double(cfg.updates_per_batch) * cfg.minibatches;
    st.loss.total /= n_updates;
    st.loss.policy /= n_updates;
    st.loss.value /= n_updates;
    st.loss.entropy /= n_updates;
    st.loss.approx_kl /= n_updates;
    st.loss.clip_fraction /= n_updates;
    st.step = steps;
    st.mean_reward = reward_sum / double(total);
    st.mean_episode_return = finished ? finished_return / finished : std::numeric_limits<double>::quiet_NaN();
    result.stats.push_back(st);
    if (hook) hook(steps, policy);
  }
  result.policy = std::move(policy);
  return result;
}

// ------------------------------------------------------------------ persistence

void save_policy(const Policy& policy, const std::filesystem::path& path, std::uint64_t seed,
                 const std::string& model_hash) {
  nlohmann::json h;
  h["format"] = "hammer-policy";
  h["version"] = 1;
  h["obs_dim"] = policy.obs_dim();
  h["act_dim"] = policy.act_dim();
  h["actor_sizes"] = policy.actor.sizes();
  h["critic_sizes"] = policy.critic.sizes();
  h["norm_count"] = policy.norm.count;
  h["norm_clip"] = policy.norm.clip;
  h["seed"] = seed;
  h["model_hash"] = model_hash;
  h["n_params"] = policy.actor.num_params() + policy.critic.num_params() + 2 * policy.obs_dim();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  f << h.dump() << '\n';
  VectorXd block(h["n_params"].get<Eigen::Index>());
  block << policy.actor.params(), policy.critic.params(), policy.norm.mean, policy.norm.m2;
  write_param_block(f, block);
  if (!f) throw RuntimeFailure("write failed: " + path.string());
}

Policy load_policy(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("policy file not found: " + path.string());
  std::string line;
  std::getline(f, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": bad policy header: " + e.what());
  }
  if (!h.contains("version")) throw ValidationError(path.string() + ": policy header lacks a version field");
  if (h.value("format", "") != "hammer-policy") throw ValidationError(path.string() + ": not a policy file");
  if (h["version"].get<int>() != 1) throw ValidationError(path.string() + ": unsupported policy version");

  const int obs_dim = h.at("obs_dim").get<int>(), act_dim = h.at("act_dim").get<int>();
  auto a_sizes = h.at("actor_sizes").get<std::vector<int>>();
  auto c_sizes = h.at("critic_sizes").get<std::vector<int>>();
  require(a_sizes.size() >= 2 && c_sizes.size() >= 2, "policy file: bad layer sizes");
  Policy p(obs_dim, act_dim, std::vector<int>(a_sizes.begin() + 1, a_sizes.end() - 1),
           std::vector<int>(c_sizes.begin() + 1, c_sizes.end() - 1));
  require(p.actor.sizes() == a_sizes && p.critic.sizes() == c_sizes, "policy file: inconsistent layer sizes");
  const auto n = h.at("n_params").get<Eigen::Index>();
  require(n == p.actor.num_params() + p.critic.num_params() + 2 * obs_dim, "policy file: parameter count mismatch");
  const VectorXd block = read_param_block(f, n);
  Eigen::Index at = 0;
  p.actor.params() = block.segment(at, p.actor.num_params());
  at += p.actor.num_params();
  p.critic.params() = block.segment(at, p.critic.num_params());
  at += p.critic.num_params();
  p.norm.mean = block.segment(at, obs_dim);
  p.norm.m2 = block.segment(at + obs_dim, obs_dim);
  p.norm.count = h.at("norm_count").get<double>();
  p.norm.clip = h.at("norm_clip").get<double>();
  return p;
}

}  // namespace hammer
