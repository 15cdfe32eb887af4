#include "hammer/dynmodel.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace hammer {

using nn::Matrix;
using nn::Vector;

std::string to_string(Prediction p) { return p == Prediction::DeltaQ ? "dq" : "dqdot"; }
std::string to_string(Arch a) { return a == Arch::Mlp ? "mlp" : "kan"; }

Prediction parse_prediction(const std::string& s) {
  if (s == "dq") return Prediction::DeltaQ;
  if (s == "dqdot") return Prediction::DeltaQd;
  throw ValidationError("unknown prediction variant '" + s + "' (expected dq or dqdot)");
}

Arch parse_arch(const std::string& s) {
  if (s == "mlp") return Arch::Mlp;
  if (s == "kan") return Arch::Kan;
  throw ValidationError("unknown architecture '" + s + "' (expected mlp or kan)");
}

void DynModelSpec::validate() const {
  require(lags >= 0, "dynmodel: lags must be >= 0");
  require(horizon >= 1, "dynmodel: horizon must be >= 1");
  require(lr > 0.0, "dynmodel: learning rate must be > 0");
  require(batch >= 1, "dynmodel: batch must be >= 1");
  require(dt > 0.0, "dynmodel: dt must be > 0");
  for (int h : hidden) require(h > 0, "dynmodel: hidden widths must be > 0");
  if (arch == Arch::Kan) require(kan_degree >= 1, "dynmodel: KAN basis degree must be >= 1");
}

// ------------------------------------------------------------------ LagWindow

LagWindow LagWindow::at_rest(int lags, Prediction prediction, const JointConfig& q) {
  require(lags >= 0, "lag window: lags must be >= 0");
  LagWindow w;
  const JointVec fill = prediction == Prediction::DeltaQ ? q : JointVec::Zero();
  w.states.assign(std::size_t(lags) + 1, fill);
  w.actions.assign(std::size_t(lags) + 1, JointVec::Zero());
  w.q = q;
  w.v.setZero();
  return w;
}

void LagWindow::push_action(const DiscreteAction& a) {
  std::rotate(actions.begin(), actions.begin() + 1, actions.end());
  actions.back() = a.as_vector();
}

void LagWindow::push_state(Prediction prediction, const JointConfig& q_next, const JointVel& v_next) {
  std::rotate(states.begin(), states.begin() + 1, states.end());
  states.back() = prediction == Prediction::DeltaQ ? q_next : v_next;
  q = q_next;
  v = v_next;
}

// ------------------------------------------------------------------ DynModel

namespace {

std::vector<int> layer_sizes(const DynModelSpec& spec) {
  std::vector<int> sizes{spec.input_dim()};
  sizes.insert(sizes.end(), spec.hidden.begin(), spec.hidden.end());
  sizes.push_back(kJoints);
  return sizes;
}

}  // namespace

DynModel::DynModel(DynModelSpec spec, NormBounds bounds) : spec_(std::move(spec)), bounds_(bounds) {
  spec_.validate();
  bounds_.validate();
  if (spec_.arch == Arch::Mlp)
    net_ = nn::Mlp(layer_sizes(spec_));
  else
    net_ = nn::Kan(layer_sizes(spec_), spec_.kan_degree);
}

nn::Vector& DynModel::params() {
  return std::visit([](auto& n) -> nn::Vector& { return n.params(); }, net_);
}

const nn::Vector& DynModel::params() const {
  return std::visit([](const auto& n) -> const nn::Vector& { return n.params(); }, net_);
}

void DynModel::init(Rng& rng, double output_scale) {
  std::visit([&](auto& n) { n.init(rng, output_scale); }, net_);
}

Matrix DynModel::forward(const Matrix& x, Cache* cache) const {
  if (const auto* mlp = std::get_if<nn::Mlp>(&net_)) return mlp->forward(x, cache ? &cache->mlp : nullptr);
  return std::get<nn::Kan>(net_).forward(x, cache ? &cache->kan : nullptr);
}

void DynModel::backward(const Cache& cache, const Matrix& dy, Eigen::Ref<Vector> grad, Matrix* dx) const {
  if (const auto* mlp = std::get_if<nn::Mlp>(&net_))
    mlp->backward(cache.mlp, dy, grad, dx);
  else
    std::get<nn::Kan>(net_).backward(cache.kan, dy, grad, dx);
}

NextState DynModel::predict_next(const Eigen::VectorXd& x, const JointConfig& q, const JointVel& v_prev) const {
  if (x.size() != spec_.input_dim())
    throw ValidationError("predict_next: state vector has dimension " + std::to_string(x.size()) + ", expected " +
                          std::to_string(spec_.input_dim()));
  const JointVec f = forward(x).col(0);
  if (spec_.prediction == Prediction::DeltaQ) return {q + f, v_prev};
  const JointVel v = v_prev + f;
  return {q + spec_.dt * v, v};
}

JointVec DynModel::normalize_state(const JointVec& s) const {
  return spec_.prediction == Prediction::DeltaQ ? minmax(s, bounds_.q_min, bounds_.q_max)
                                                : minmax(s, bounds_.qd_min, bounds_.qd_max);
}

void DynModel::write_state_vector(const LagWindow& w, Eigen::Ref<Eigen::VectorXd> out) const {
  const int slots = spec_.lags + 1;
  if (int(w.states.size()) != slots || int(w.actions.size()) != slots)
    throw ValidationError("state vector: window length does not match the model's lags");
  for (int s = 0; s < slots; ++s) {
    out.segment<4>(4 * s) = normalize_state(w.states[std::size_t(s)]);
    out.segment<4>(4 * slots + 4 * s) = w.actions[std::size_t(s)];
  }
  out.tail<4>() = normalize_config(w.q);
}

Eigen::VectorXd DynModel::state_vector(const LagWindow& w) const {
  Eigen::VectorXd x(spec_.input_dim());
  write_state_vector(w, x);
  return x;
}

void DynModel::advance(LagWindow& w, const DiscreteAction& a) const {
  LagWindow* p = &w;
  advance_batch(std::span<LagWindow* const>(&p, 1), std::span<const DiscreteAction>(&a, 1));
}

void DynModel::advance_batch(std::span<LagWindow* const> windows, std::span<const DiscreteAction> actions,
                             std::vector<char>* nonfinite) const {
  require(windows.size() == actions.size(), "advance_batch: windows and actions differ in length");
  const auto n = Eigen::Index(windows.size());
  if (n == 0) return;
  if (nonfinite) nonfinite->assign(windows.size(), 0);
  Matrix x(spec_.input_dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    windows[std::size_t(i)]->push_action(actions[std::size_t(i)]);
    write_state_vector(*windows[std::size_t(i)], x.col(i));
  }
  const Matrix f = forward(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    LagWindow& w = *windows[std::size_t(i)];
    const JointVec fi = f.col(i);
    if (!fi.allFinite()) {
      if (!nonfinite) throw NonFiniteError("dynamics model produced a non-finite prediction", long(i));
      (*nonfinite)[std::size_t(i)] = 1;
      continue;
    }
    if (spec_.prediction == Prediction::DeltaQ) {
      w.push_state(spec_.prediction, w.q + fi, w.v);
    } else {
      const JointVel v = w.v + fi;
      w.push_state(spec_.prediction, w.q + spec_.dt * v, v);
    }
  }
}

std::vector<JointConfig> rollout(const DynModel& model, LagWindow w, std::span<const DiscreteAction> actions) {
  std::vector<JointConfig> out;
  out.reserve(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    try {
      model.advance(w, actions[i]);
    } catch (const NonFiniteError&) {
      throw NonFiniteError("rollout: non-finite prediction at step " + std::to_string(i), long(i));
    }
    out.push_back(w.q);
  }
  return out;
}

// ------------------------------------------------------------------ data

void reconstruct_velocities(Dataset& data, const TrackerGains& gains) {
  for (auto& traj : data.trajectories) {
    LoopTracker tracker(gains);
    traj.qd.clear();
    traj.qd.reserve(traj.size());
    for (const auto& q : traj.q) traj.qd.push_back(tracker.update(q));
  }
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "split: train fraction must be in (0, 1)");
  Dataset train, eval;
  for (const auto& traj : data.trajectories) {
    const auto cut = std::size_t(double(traj.size()) * train_fraction);
    auto slice = [&](std::size_t lo, std::size_t hi) {
      Trajectory t;
      t.q.assign(traj.q.begin() + long(lo), traj.q.begin() + long(hi));
      t.a.assign(traj.a.begin() + long(lo), traj.a.begin() + long(hi));
      if (!traj.qd.empty()) t.qd.assign(traj.qd.begin() + long(lo), traj.qd.begin() + long(hi));
      return t;
    };
    train.trajectories.push_back(slice(0, cut));
    eval.trajectories.push_back(slice(cut, traj.size()));
  }
  return {std::move(train), std::move(eval)};
}

NormBounds norm_bounds_from_data(const Dataset& train, const KinematicChain& chain) {
  NormBounds b;
  b.q_min = chain.q_min;
  b.q_max = chain.q_max;
  b.qd_min = JointVec::Constant(std::numeric_limits<double>::infinity());
  b.qd_max = -b.qd_min;
  for (const auto& traj : train.trajectories) {
    require(traj.qd.size() == traj.size(), "norm bounds: velocities have not been reconstructed");
    for (const auto& v : traj.qd) {
      b.qd_min = b.qd_min.cwiseMin(v);
      b.qd_max = b.qd_max.cwiseMax(v);
    }
  }
  for (int j = 0; j < kJoints; ++j) {
    if (!(b.qd_min[j] < b.qd_max[j])) {  // no motion recorded on this joint
      b.qd_min[j] = -1.0;
      b.qd_max[j] = 1.0;
    }
  }
  return b;
}

std::vector<SubTrajectory> sample_subtrajectories(const Dataset& data, int lags, int horizon, int count, Rng& rng) {
  std::vector<long> usable;
  long total = 0;
  for (const auto& traj : data.trajectories) {
    const long n = std::max(0L, long(traj.size()) - lags - horizon);
    usable.push_back(n);
    total += n;
  }
  if (total == 0)
    throw ValidationError("no trajectory has the " + std::to_string(lags + horizon + 1) +
                          " samples needed for a sub-trajectory");
  std::vector<SubTrajectory> out;
  out.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) {
    long r = long(rng() % std::uint64_t(total));
    std::size_t t = 0;
    while (r >= usable[t]) r -= usable[t++];
    out.push_back({&data.trajectories[t], lags + r});
  }
  return out;
}

double multi_step_loss(const DynModel& model, std::span<const SubTrajectory> batch, int horizon, Vector* grad) {
  const auto& spec = model.spec();
  const auto& bounds = model.bounds();
  const int k = spec.lags;
  const int slots = k + 1;
  const bool velocity = spec.prediction == Prediction::DeltaQd;
  const auto nb = Eigen::Index(batch.size());
  require(nb > 0 && horizon >= 1, "multi_step_loss: empty batch or horizon < 1");
  for (const auto& s : batch) {
    require(s.traj != nullptr && s.start >= k && s.start + horizon < long(s.traj->size()),
            "multi_step_loss: sub-trajectory out of range");
    if (velocity) require(s.traj->qd.size() == s.traj->size(), "multi_step_loss: velocities not reconstructed");
  }
  if (grad) require(grad->size() == model.num_params(), "multi_step_loss: gradient size mismatch");

  std::vector<Matrix> qhat(std::size_t(horizon) + 1, Matrix(4, nb));
  std::vector<Matrix> vhat(velocity ? std::size_t(horizon) + 1 : 0, Matrix(4, nb));
  for (Eigen::Index b = 0; b < nb; ++b) {
    const auto& s = batch[std::size_t(b)];
    qhat[0].col(b) = s.traj->q[std::size_t(s.start)];
    if (velocity) vhat[0].col(b) = s.traj->qd[std::size_t(s.start)];
  }

  // Raw window value for relative time tau (<= 0 from data, > 0 predicted).
  auto window_value = [&](Eigen::Index b, int tau) -> JointVec {
    const auto& s = batch[std::size_t(b)];
    if (tau <= 0) {
      const auto idx = std::size_t(s.start + tau);
      return velocity ? s.traj->qd[idx] : s.traj->q[idx];
    }
    return velocity ? JointVec(vhat[std::size_t(tau)].col(b)) : JointVec(qhat[std::size_t(tau)].col(b));
  };

  std::vector<DynModel::Cache> caches(grad ? std::size_t(horizon) : 0);
  Matrix x(spec.input_dim(), nb);
  for (int j = 0; j < horizon; ++j) {
    for (Eigen::Index b = 0; b < nb; ++b) {
      const auto& s = batch[std::size_t(b)];
      for (int slot = 0; slot < slots; ++slot) {
        const int tau = j - k + slot;
        x.block<4, 1>(4 * slot, b) = model.normalize_state(window_value(b, tau));
        x.block<4, 1>(4 * slots + 4 * slot, b) = s.traj->a[std::size_t(s.start + tau)].as_vector();
      }
      x.block<4, 1>(8 * slots, b) = model.normalize_config(qhat[std::size_t(j)].col(b));
    }
    const Matrix f = model.forward(x, grad ? &caches[std::size_t(j)] : nullptr);
    if (velocity) {
      vhat[std::size_t(j) + 1] = vhat[std::size_t(j)] + f;
      qhat[std::size_t(j) + 1] = qhat[std::size_t(j)] + spec.dt * vhat[std::size_t(j) + 1];
    } else {
      qhat[std::size_t(j) + 1] = qhat[std::size_t(j)] + f;
    }
  }

  const double scale = 1.0 / (double(horizon) * double(nb));
  double loss = 0.0;
  std::vector<Matrix> gq(grad ? std::size_t(horizon) + 1 : 0, Matrix::Zero(4, nb));
  for (int j = 1; j <= horizon; ++j) {
    for (Eigen::Index b = 0; b < nb; ++b) {
      const auto& s = batch[std::size_t(b)];
      const JointVec err = qhat[std::size_t(j)].col(b) - s.traj->q[std::size_t(s.start + j)];
      loss += err.squaredNorm();
      if (grad) gq[std::size_t(j)].col(b) = 2.0 * scale * err;
    }
  }
  loss *= scale;
  if (!grad) return loss;

  std::vector<Matrix> gv(velocity ? std::size_t(horizon) + 1 : 0, Matrix::Zero(4, nb));
  Matrix dx;
  for (int j = horizon - 1; j >= 0; --j) {
    const auto ju = std::size_t(j);
    Matrix df;
    if (velocity) {
      gv[ju + 1] += spec.dt * gq[ju + 1];
      gq[ju] += gq[ju + 1];
      df = gv[ju + 1];
      gv[ju] += gv[ju + 1];
    } else {
      df = gq[ju + 1];
      gq[ju] += gq[ju + 1];
    }
    model.backward(caches[ju], df, *grad, &dx);

    for (Eigen::Index b = 0; b < nb; ++b) {
      for (int slot = 0; slot < slots; ++slot) {
        const int tau = j - k + slot;
        if (tau < 1) continue;
        const auto tu = std::size_t(tau);
        const JointVec d = dx.block<4, 1>(4 * slot, b);
        if (velocity)
          gv[tu].col(b) += minmax_slope(vhat[tu].col(b), bounds.qd_min, bounds.qd_max).cwiseProduct(d);
        else
          gq[tu].col(b) += minmax_slope(qhat[tu].col(b), bounds.q_min, bounds.q_max).cwiseProduct(d);
      }
      if (j >= 1) {
        const JointVec d = dx.block<4, 1>(8 * slots, b);
        gq[ju].col(b) += minmax_slope(qhat[ju].col(b), bounds.q_min, bounds.q_max).cwiseProduct(d);
      }
    }
  }
  return loss;
}

double eval_metric(const DynModel& model, const Dataset& eval, int count, int horizon, std::uint64_t seed) {
  require(count >= 1, "eval_metric: count must be >= 1");
  Rng rng = make_rng(seed, 0xE7A1);
  const auto subs = sample_subtrajectories(eval, model.spec().lags, horizon, count, rng);
  return multi_step_loss(model, subs, horizon);
}

// ------------------------------------------------------------------ training

void TrainConfig::validate() const {
  require(max_epochs >= 1, "train: max_epochs must be >= 1");
  require(batches_per_epoch >= 1, "train: batches_per_epoch must be >= 1");
  require(patience >= 1, "train: patience must be >= 1");
  require(eval_trajectories >= 1 && eval_horizon >= 1, "train: evaluation settings must be >= 1");
}

TrainResult train(const DynModelSpec& spec, const Dataset& train_set, const Dataset& val_set, const NormBounds& bounds,
                  const TrainConfig& cfg, nn::Optimizer* optimizer) {
  cfg.validate();
  DynModel model(spec, bounds);
  model.seed = cfg.seed;
  Rng init_rng = make_rng(cfg.seed, 1);
  model.init(init_rng);

  nn::Adam adam({.lr = spec.lr});
  nn::Optimizer& opt = optimizer ? *optimizer : adam;
  opt.reset(model.num_params());

  Rng batch_rng = make_rng(cfg.seed, 2);
  Vector grad(model.num_params());
  Vector best = model.params();
  TrainHistory hist;
  hist.best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double sum = 0.0;
    for (int it = 0; it < cfg.batches_per_epoch; ++it) {
      const auto subs = sample_subtrajectories(train_set, spec.lags, spec.horizon, spec.batch, batch_rng);
      grad.setZero();
      const double loss = multi_step_loss(model, subs, spec.horizon, &grad);
      if (!std::isfinite(loss) || !grad.allFinite())
        throw TrainingAborted("training loss became non-finite in epoch " + std::to_string(epoch), epoch);
      opt.step(model.params(), grad);
      sum += loss;
    }
    const double val = eval_metric(model, val_set, cfg.eval_trajectories, cfg.eval_horizon, cfg.seed);
    hist.train_loss.push_back(sum / cfg.batches_per_epoch);
    hist.val_metric.push_back(val);
    if (!std::isfinite(val))
      throw TrainingAborted("validation metric became non-finite in epoch " + std::to_string(epoch), epoch);
    if (val < hist.best_val) {
      hist.best_val = val;
      hist.best_epoch = epoch;
      best = model.params();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      hist.early_stopped = true;
      break;
    }
  }
  model.params() = best;
  return {std::move(model), std::move(hist)};
}

SearchSpace SearchSpace::defaults(Arch arch, Prediction prediction) {
  SearchSpace s;
  s.arch = arch;
  s.prediction = prediction;
  s.lags = {18, 19, 20, 21, 22, 23, 24, 25};
  s.lrs = {1e-3, 1e-4, 1e-5};
  s.batches = {256, 512, 1024, 2048};
  if (arch == Arch::Mlp) {
    s.horizons = {4, 8, 16, 32};
    s.depths = {2, 3, 4, 5};
    s.widths = {64, 128, 256, 512};
  } else {
    s.horizons = {8, 16, 32};
    s.depths = {3, 4, 5};
    s.widths = {4, 8, 16, 32};
  }
  return s;
}

void SearchSpace::validate() const {
  require(!lags.empty() && !lrs.empty() && !batches.empty() && !horizons.empty() && !depths.empty() && !widths.empty(),
          "search space: every dimension needs at least one value");
}

std::vector<SearchTrial> search_hyperparameters(const SearchSpace& space, const Dataset& train_set,
                                                const Dataset& val_set, const NormBounds& bounds, int budget,
                                                const TrainConfig& trial_cfg, Rng& rng) {
  require(budget >= 1, "search: budget must be >= 1");
  space.validate();
  auto pick = [&rng](const auto& v) { return v[std::size_t(rng() % v.size())]; };

  std::vector<SearchTrial> trials;
  for (int t = 0; t < budget; ++t) {
    DynModelSpec spec;
    spec.prediction = space.prediction;
    spec.arch = space.arch;
    spec.kan_degree = space.kan_degree;
    spec.lags = pick(space.lags);
    spec.lr = pick(space.lrs);
    spec.batch = pick(space.batches);
    spec.horizon = pick(space.horizons);
    const int depth = pick(space.depths);
    spec.hidden.clear();
    for (int l = 0; l < depth; ++l) spec.hidden.push_back(pick(space.widths));

    const auto result = train(spec, train_set, val_set, bounds, trial_cfg);
    trials.push_back({spec, result.history.best_val, result.model.num_params(), t});
  }
  std::stable_sort(trials.begin(), trials.end(), [](const SearchTrial& a, const SearchTrial& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.spec.lags != b.spec.lags) return a.spec.lags > b.spec.lags;
    return a.n_params < b.n_params;
  });
  return trials;
}

// ------------------------------------------------------------------ persistence

namespace {

constexpr int kModelFormatVersion = 1;

nlohmann::json vec_json(const JointVec& v) { return {v[0], v[1], v[2], v[3]}; }

JointVec json_vec(const nlohmann::json& j) {
  require(j.is_array() && j.size() == 4, "model file: expected a 4-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace

void write_param_block(std::ostream& os, const Vector& params) {
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(params[i]);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu);
    os.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

Vector read_param_block(std::istream& is, Eigen::Index n) {
  Vector params(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw ValidationError("parameter block truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(bytes[b]) << (8 * b);
    params[i] = std::bit_cast<double>(bits);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw ValidationError("trailing bytes after parameter block");
  return params;
}

void save_model(const DynModel& model, const std::filesystem::path& path) {
  const auto& s = model.spec();
  const auto& b = model.bounds();
  nlohmann::json h;
  h["format"] = "hammer-dynmodel";
  h["version"] = kModelFormatVersion;
  h["spec"] = {{"prediction", to_string(s.prediction)},
               {"arch", to_string(s.arch)},
               {"hidden", s.hidden},
               {"kan_degree", s.kan_degree},
               {"lags", s.lags},
               {"horizon", s.horizon},
               {"lr", s.lr},
               {"batch", s.batch},
               {"dt", s.dt}};
  h["norm_bounds"] = {{"q_min", vec_json(b.q_min)},
                      {"q_max", vec_json(b.q_max)},
                      {"qd_min", vec_json(b.qd_min)},
                      {"qd_max", vec_json(b.qd_max)}};
  h["seed"] = model.seed;
  h["dataset_hash"] = model.dataset_hash;
  h["n_params"] = model.num_params();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  f << h.dump() << '\n';
  write_param_block(f, model.params());
  if (!f) throw RuntimeFailure("write failed: " + path.string());
}

DynModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("model file not found: " + path.string());
  std::string line;
  std::getline(f, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": bad model header: " + e.what());
  }
  if (!h.contains("version")) throw ValidationError(path.string() + ": model header lacks a version field");
  if (h.value("format", "") != "hammer-dynmodel") throw ValidationError(path.string() + ": not a dynamics model file");
  if (h["version"].get<int>() != kModelFormatVersion)
    throw ValidationError(path.string() + ": unsupported model version " + h["version"].dump());

  const auto& js = h.at("spec");
  DynModelSpec spec;
  spec.prediction = parse_prediction(js.at("prediction").get<std::string>());
  spec.arch = parse_arch(js.at("arch").get<std::string>());
  spec.hidden = js.at("hidden").get<std::vector<int>>();
  spec.kan_degree = js.at("kan_degree").get<int>();
  spec.lags = js.at("lags").get<int>();
  spec.horizon = js.at("horizon").get<int>();
  spec.lr = js.at("lr").get<double>();
  spec.batch = js.at("batch").get<int>();
  spec.dt = js.at("dt").get<double>();

  const auto& jb = h.at("norm_bounds");
  NormBounds bounds;
  bounds.q_min = json_vec(jb.at("q_min"));
  bounds.q_max = json_vec(jb.at("q_max"));
  bounds.qd_min = json_vec(jb.at("qd_min"));
  bounds.qd_max = json_vec(jb.at("qd_max"));

  DynModel model(spec, bounds);
  model.seed = h.value("seed", std::uint64_t{0});
  model.dataset_hash = h.value("dataset_hash", std::string{});
  const auto n = h.at("n_params").get<Eigen::Index>();
  if (n != model.num_params()) throw ValidationError(path.string() + ": parameter count does not match the spec");
  model.params() = read_param_block(f, n);
  return model;
}

}  // namespace hammer
