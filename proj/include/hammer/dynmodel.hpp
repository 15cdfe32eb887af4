#pragma once

#include "hammer/dataset.hpp"
#include "hammer/kinematics.hpp"
#include "hammer/nn.hpp"
#include "hammer/observer.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hammer {

enum class Prediction { DeltaQ, DeltaQd };
enum class Arch { Mlp, Kan };

std::string to_string(Prediction p);
std::string to_string(Arch a);
Prediction parse_prediction(const std::string& s);  // "dq" | "dqdot"
Arch parse_arch(const std::string& s);              // "mlp" | "kan"

struct DynModelSpec {
  Prediction prediction = Prediction::DeltaQd;
  Arch arch = Arch::Mlp;
  std::vector<int> hidden{512, 128};
  int kan_degree = 5;
  int lags = 18;
  int horizon = 16;
  double lr = 1e-3;
  int batch = 256;
  double dt = kControlDt;

  void validate() const;
  int input_dim() const { return state_vector_dim(lags); }
};

/// Lag window feeding the residual model. `states` holds raw positions (DeltaQ)
/// or raw velocities (DeltaQd); `actions` ends with the last applied command.
struct LagWindow {
  std::vector<JointVec> states;
  std::vector<JointVec> actions;
  JointConfig q = JointConfig::Zero();
  JointVel v = JointVel::Zero();

  /// Current config repeated (DeltaQ) or zero velocities (DeltaQd); zero actions.
  static LagWindow at_rest(int lags, Prediction prediction, const JointConfig& q);

  int lags() const { return int(states.size()) - 1; }
  void push_action(const DiscreteAction& a);
  /// Appends the new sample and makes (q, v) current.
  void push_state(Prediction prediction, const JointConfig& q_next, const JointVel& v_next);
};

struct NextState {
  JointConfig q;
  JointVel v;
};

class DynModel {
 public:
  struct Cache {
    nn::Mlp::Cache mlp;
    nn::Kan::Cache kan;
  };

  DynModel(DynModelSpec spec, NormBounds bounds);

  const DynModelSpec& spec() const { return spec_; }
  const NormBounds& bounds() const { return bounds_; }
  nn::Vector& params();
  const nn::Vector& params() const;
  Eigen::Index num_params() const { return params().size(); }

  void init(Rng& rng, double output_scale = 0.1);

  /// Residual network on a batch of state vectors (columns).
  nn::Matrix forward(const nn::Matrix& x, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const nn::Matrix& dy, Eigen::Ref<nn::Vector> grad, nn::Matrix* dx) const;

  /// DeltaQ: q' = q + f(x). DeltaQd: v' = v_prev + f(x), q' = q + dt v'.
  NextState predict_next(const Eigen::VectorXd& x, const JointConfig& q, const JointVel& v_prev) const;

  /// Normalization applied to window entries for this model's variant.
  JointVec normalize_state(const JointVec& s) const;
  JointVec normalize_config(const JointConfig& q) const { return minmax(q, bounds_.q_min, bounds_.q_max); }
  Eigen::VectorXd state_vector(const LagWindow& w) const;
  void write_state_vector(const LagWindow& w, Eigen::Ref<Eigen::VectorXd> out) const;

  /// One control tick: pushes `a`, predicts, pushes the prediction.
  void advance(LagWindow& w, const DiscreteAction& a) const;
  /// Same tick for many windows with a single batched network call. Without
  /// `nonfinite` a non-finite prediction throws; with it the offending window is
  /// left unchanged and flagged.
  void advance_batch(std::span<LagWindow* const> windows, std::span<const DiscreteAction> actions,
                     std::vector<char>* nonfinite = nullptr) const;

  // Provenance stored in the model file.
  std::uint64_t seed = 0;
  std::string dataset_hash;

 private:
  DynModelSpec spec_;
  NormBounds bounds_;
  std::variant<nn::Mlp, nn::Kan> net_;
};

/// Open-loop prediction of q for each action (one tick each), starting from `init`.
/// Throws NonFiniteError carrying the offending step index.
std::vector<JointConfig> rollout(const DynModel& model, LagWindow init, std::span<const DiscreteAction> actions);

// ------------------------------------------------------------------ data

void reconstruct_velocities(Dataset& data, const TrackerGains& gains);

/// First `train_fraction` of every trajectory for training, the rest for evaluation.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction = 0.9);

/// q bounds from the joint limits; qd bounds from the observer's estimates.
NormBounds norm_bounds_from_data(const Dataset& train, const KinematicChain& chain);

struct SubTrajectory {
  const Trajectory* traj = nullptr;
  long start = 0;  // t_i; requires start >= lags and start + horizon < size
};

/// Uniform over all valid starts (trajectories weighted by usable length).
std::vector<SubTrajectory> sample_subtrajectories(const Dataset& data, int lags, int horizon, int count, Rng& rng);

/// Mean over the batch of (1/H) sum_j ||q_hat_{t+j} - q_{t+j}||^2 with open-loop
/// predictions. When `grad` is given, adds the exact BPTT gradient of the loss.
double multi_step_loss(const DynModel& model, std::span<const SubTrajectory> batch, int horizon,
                       nn::Vector* grad = nullptr);

/// Multi-step loss on `count` seed-determined sub-trajectories of the evaluation split.
double eval_metric(const DynModel& model, const Dataset& eval, int count = 100, int horizon = 80,
                   std::uint64_t seed = 0);

// ------------------------------------------------------------------ training

struct TrainConfig {
  int max_epochs = 1000;
  int batches_per_epoch = 50;
  int patience = 50;
  int eval_trajectories = 100;
  int eval_horizon = 80;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> val_metric;  // eval_metric on the validation split per epoch
  int best_epoch = -1;
  double best_val = 0.0;
  bool early_stopped = false;
};

class TrainingAborted : public RuntimeFailure {
 public:
  TrainingAborted(const std::string& what, int epoch) : RuntimeFailure(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

struct TrainResult {
  DynModel model;
  TrainHistory history;
};

/// Adam on the multi-step loss; keeps the parameters with the best validation
/// metric and stops after `patience` epochs without improvement. `optimizer`
/// overrides the default Adam(spec.lr).
TrainResult train(const DynModelSpec& spec, const Dataset& train_set, const Dataset& val_set,
                  const NormBounds& bounds, const TrainConfig& cfg, nn::Optimizer* optimizer = nullptr);

struct SearchSpace {
  Prediction prediction = Prediction::DeltaQd;
  Arch arch = Arch::Mlp;
  int kan_degree = 5;
  std::vector<int> lags;
  std::vector<double> lrs;
  std::vector<int> batches;
  std::vector<int> horizons;
  std::vector<int> depths;
  std::vector<int> widths;

  static SearchSpace defaults(Arch arch, Prediction prediction);
  void validate() const;
};

struct SearchTrial {
  DynModelSpec spec;
  double score = 0.0;
  Eigen::Index n_params = 0;
  int trial = 0;
};

/// Random search; ranked by eval_metric ascending, ties to larger lags then fewer parameters.
std::vector<SearchTrial> search_hyperparameters(const SearchSpace& space, const Dataset& train_set,
                                                const Dataset& val_set, const NormBounds& bounds, int budget,
                                                const TrainConfig& trial_cfg, Rng& rng);

// ------------------------------------------------------------------ persistence

/// One JSON header line (format, version, spec, bounds, provenance, n_params)
/// followed by the parameters as little-endian IEEE-754 doubles.
void save_model(const DynModel& model, const std::filesystem::path& path);
DynModel load_model(const std::filesystem::path& path);

void write_param_block(std::ostream& os, const nn::Vector& params);
nn::Vector read_param_block(std::istream& is, Eigen::Index n);

}  // namespace hammer
