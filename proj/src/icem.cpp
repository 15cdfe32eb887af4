#include "hammer/icem.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace hammer {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

void IcemConfig::validate() const {
  require(horizon >= 1, "icem: horizon must be >= 1");
  require(population >= 1 && elites >= 1 && elites <= population, "icem: need 1 <= elites <= population");
  require(sigma0 > 0.0, "icem: sigma0 must be > 0");
  require(alpha >= 0.0 && alpha < 1.0, "icem: alpha must be in [0, 1)");
  require(iterations >= 1, "icem: iterations must be >= 1");
  require(beta >= 0.0, "icem: beta must be >= 0");
  require(elite_fraction >= 0.0 && elite_fraction <= 1.0, "icem: elite_fraction must be in [0, 1]");
  require(action_repeat >= 1, "icem: action_repeat must be >= 1");
  require(gamma > 0.0 && gamma <= 1.0, "icem: gamma must be in (0, 1]");
  require(flags.any(), "icem: at least one reward term must be enabled");
}

PlanDistribution PlanDistribution::initial(int horizon, int act_dim, double sigma0) {
  return {MatrixXd::Zero(horizon, act_dim), MatrixXd::Constant(horizon, act_dim, sigma0)};
}

MatrixXd colored_noise(double beta, int horizon, int act_dim, Rng& rng) {
  require(horizon >= 1 && act_dim >= 1, "colored_noise: empty shape");
  const int n = horizon;
  const int nf = n / 2 + 1;  // rfft bins
  // Amplitude per bin, f^(-beta/2) with the zero bin pinned to the lowest resolvable frequency.
  std::vector<double> scale(std::size_t(nf), 1.0);
  for (int k = 0; k < nf; ++k) {
    const double f = std::max(double(k) / n, 1.0 / n);
    scale[std::size_t(k)] = std::pow(f, -beta / 2.0);
  }
  // Exact per-sample standard deviation of the synthesis below, DC and Nyquist included.
  double var = 2.0 * scale[0] * scale[0];
  for (int k = 1; k < nf; ++k) {
    const bool nyquist = n % 2 == 0 && k == nf - 1;
    var += (nyquist ? 2.0 : 4.0) * scale[std::size_t(k)] * scale[std::size_t(k)];
  }
  const double sigma = n > 1 ? std::sqrt(var) / n : 1.0;

  MatrixXd cosk(n, nf), sink(n, nf);
  for (int t = 0; t < n; ++t)
    for (int k = 0; k < nf; ++k) {
      const double ph = 2.0 * std::numbers::pi * k * t / n;
      cosk(t, k) = std::cos(ph);
      sink(t, k) = std::sin(ph);
    }

  MatrixXd out(n, act_dim);
  std::vector<double> re(static_cast<std::size_t>(nf)), im(static_cast<std::size_t>(nf));
  for (int a = 0; a < act_dim; ++a) {
    if (n == 1) {
      out(0, a) = standard_normal(rng);
      continue;
    }
    for (int k = 0; k < nf; ++k) {
      re[std::size_t(k)] = scale[std::size_t(k)] * standard_normal(rng);
      im[std::size_t(k)] = scale[std::size_t(k)] * standard_normal(rng);
    }
    im[0] = 0.0;
    re[0] *= std::numbers::sqrt2;
    if (n % 2 == 0) {
      im[std::size_t(nf - 1)] = 0.0;
      re[std::size_t(nf - 1)] *= std::numbers::sqrt2;
    }
    // Inverse real DFT.
    for (int t = 0; t < n; ++t) {
      double acc = re[0];
      for (int k = 1; k < nf; ++k) {
        const double term = re[std::size_t(k)] * cosk(t, k) - im[std::size_t(k)] * sink(t, k);
        acc += (n % 2 == 0 && k == nf - 1) ? term : 2.0 * term;
      }
      out(t, a) = acc / n / sigma;
    }
  }
  return out;
}

PlanDistribution shift_distribution(const PlanDistribution& d, double sigma0) {
  PlanDistribution s = d;
  const auto h = d.mu.rows();
  if (h > 1) {
    s.mu.topRows(h - 1) = d.mu.bottomRows(h - 1);
    s.sigma.topRows(h - 1) = d.sigma.bottomRows(h - 1);
  }
  s.mu.row(h - 1).setZero();
  s.sigma.row(h - 1).setConstant(sigma0);
  return s;
}

// ------------------------------------------------------------------ model backend

ModelPlanBackend::ModelPlanBackend(const DynModel& model, const EnvConfig& env_cfg, RewardFlags flags,
                                   int action_repeat)
    : model_(&model), cfg_(env_cfg), repeat_(action_repeat) {
  cfg_.reward.flags = flags;
  cfg_.validate();
  require(repeat_ >= 1, "icem backend: action_repeat must be >= 1");
}

void ModelPlanBackend::set_snapshot(const LagWindow& window, const JointConfig& q_target,
                                    const DiscreteAction& last_action) {
  require(window.lags() == model_->spec().lags, "icem backend: window does not match the model's lags");
  window_ = window;
  q_target_ = q_target;
  target_ = forward_kinematics(cfg_.chain, q_target);
  last_ = last_action;
}

VectorXd ModelPlanBackend::evaluate(const std::vector<MatrixXi>& seqs, double gamma) const {
  const std::size_t n = seqs.size();
  VectorXd ret = VectorXd::Zero(Eigen::Index(n));
  if (n == 0) return ret;
  const auto h = seqs[0].rows();
  std::vector<LagWindow> w(n, window_);
  std::vector<LagWindow*> ptr(n);
  for (std::size_t i = 0; i < n; ++i) ptr[i] = &w[i];
  std::vector<DiscreteAction> act(n), prev(n, last_);
  std::vector<char> dead(n, 0), flags;
  double disc = 1.0;
  for (Eigen::Index k = 0; k < h; ++k) {
    for (std::size_t i = 0; i < n; ++i)
      for (int j = 0; j < kJoints; ++j) act[i][j] = seqs[i](k, j);
    for (int r = 0; r < repeat_; ++r) {
      model_->advance_batch(ptr, act, &flags);
      for (std::size_t i = 0; i < n; ++i) dead[i] |= flags[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (dead[i]) continue;
      const Pose pose = forward_kinematics(cfg_.chain, w[i].q);
      const bool inside = in_workspace(cfg_.ws, pose);
      const double rt = reward(cfg_.reward, w[i].q, pose, q_target_, target_, act[i], prev[i], inside).total();
      if (!std::isfinite(rt)) dead[i] = 1;
      ret[Eigen::Index(i)] += disc * rt;
    }
    prev = act;
    disc *= gamma;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (dead[i]) ret[Eigen::Index(i)] = std::numeric_limits<double>::quiet_NaN();
  return ret;
}

// ------------------------------------------------------------------ planner

PlannerState initial_planner_state(const IcemConfig& cfg, int act_dim) {
  PlannerState s;
  s.dist = PlanDistribution::initial(cfg.horizon, act_dim, cfg.sigma0);
  return s;
}

namespace {

MatrixXi discretize_sequence(const MatrixXd& proto) {
  MatrixXi out(proto.rows(), proto.cols());
  for (Eigen::Index r = 0; r < proto.rows(); ++r)
    for (Eigen::Index c = 0; c < proto.cols(); ++c) out(r, c) = proto(r, c) < -0.5 ? -1 : (proto(r, c) > 0.5 ? 1 : 0);
  return out;
}

MatrixXd shift_rows(const MatrixXd& m) {
  MatrixXd s = MatrixXd::Zero(m.rows(), m.cols());
  if (m.rows() > 1) s.topRows(m.rows() - 1) = m.bottomRows(m.rows() - 1);
  return s;
}

}  // namespace

PlanResult plan(const PlanBackend& backend, PlannerState& state, const IcemConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int h = cfg.horizon, a_dim = backend.act_dim();
  require(state.dist.mu.rows() == h && state.dist.mu.cols() == a_dim, "icem: distribution shape mismatch");

  std::vector<MatrixXd> carry;
  if (state.warm) {
    state.dist = shift_distribution(state.dist, cfg.sigma0);
    for (std::size_t i = 0; i < state.elites.size() && int(i) < cfg.carried(); ++i)
      carry.push_back(shift_rows(state.elites[i]));
  }
  if (cfg.reset_sigma) state.dist.sigma.setConstant(cfg.sigma0);

  PlanResult res;
  res.best_return = -std::numeric_limits<double>::infinity();
  std::vector<MatrixXd> elites;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<MatrixXd> samples;
    samples.reserve(std::size_t(cfg.population) + carry.size() + 1);
    for (int i = 0; i < cfg.population; ++i) {
      MatrixXd s = state.dist.mu + state.dist.sigma.cwiseProduct(colored_noise(cfg.beta, h, a_dim, rng));
      samples.push_back(s.cwiseMax(-1.0).cwiseMin(1.0));
    }
    for (auto& c : carry) samples.push_back(std::move(c));
    if (it == cfg.iterations - 1 && cfg.add_mean) samples.push_back(state.dist.mu.cwiseMax(-1.0).cwiseMin(1.0));

    std::vector<MatrixXi> disc;
    disc.reserve(samples.size());
    for (const auto& s : samples) disc.push_back(discretize_sequence(s));
    const VectorXd ret = backend.evaluate(disc, cfg.gamma);

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (std::isfinite(ret[Eigen::Index(i)]))
        idx.push_back(i);
      else
        ++res.diag.excluded;
    }
    if (idx.empty()) throw RuntimeFailure("icem: every sampled sequence produced a non-finite return");
    std::stable_sort(idx.begin(), idx.end(),
                     [&ret](std::size_t a, std::size_t b) { return ret[Eigen::Index(a)] > ret[Eigen::Index(b)]; });
    const std::size_t ne = std::min(idx.size(), std::size_t(cfg.elites));

    MatrixXd mean = MatrixXd::Zero(h, a_dim), var = MatrixXd::Zero(h, a_dim);
    double elite_sum = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      mean += samples[idx[e]];
      elite_sum += ret[Eigen::Index(idx[e])];
    }
    mean /= double(ne);
    for (std::size_t e = 0; e < ne; ++e) var += (samples[idx[e]] - mean).cwiseAbs2();
    var /= double(ne);
    state.dist.mu = cfg.alpha * state.dist.mu + (1.0 - cfg.alpha) * mean;
    state.dist.sigma = cfg.alpha * state.dist.sigma + (1.0 - cfg.alpha) * var.cwiseSqrt();

    const double best = ret[Eigen::Index(idx[0])];
    res.diag.best_return.push_back(best);
    res.diag.mean_elite_return.push_back(elite_sum / double(ne));
    if (best > res.best_return) {
      res.best_return = best;
      res.best_sequence = samples[idx[0]];
    }

    elites.clear();
    for (std::size_t e = 0; e < ne; ++e) elites.push_back(samples[idx[e]]);
    carry.clear();
    for (std::size_t e = 0; e < ne && int(e) < cfg.carried(); ++e) carry.push_back(elites[e]);
  }

  state.elites = std::move(elites);
  state.warm = true;
  const MatrixXi first = discretize_sequence(res.best_sequence.topRows(1));
  for (int j = 0; j < a_dim && j < kJoints; ++j) res.action[j] = first(0, j);
  res.diag.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

void write_plan_diagnostics(std::ostream& os, long call, const PlanDiagnostics& d, bool header) {
  if (header) os << "call,iteration,best_return,mean_elite_return,elapsed_ms\n";
  char buf[160];
  for (std::size_t i = 0; i < d.best_return.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%ld,%zu,%.10g,%.10g,%.4f\n", call, i, d.best_return[i], d.mean_elite_return[i],
                  d.elapsed_ms);
    os << buf;
  }
}

}  // namespace hammer
