#pragma once

#include "hammer/types.hpp"

#include <vector>

namespace hammer::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

/// Legendre polynomials P_0..P_degree at x via the three-term recurrence.
std::vector<double> legendre(double x, int degree);

/// Fully connected network, SiLU hidden activations, linear output. Columns of
/// the input matrix are samples. Parameters live in one flat vector, laid out
/// per layer as W (out x in, column-major) then b (out).
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes);

  struct Cache {
    std::vector<Matrix> inputs;  // inputs[l] feeds layer l
    std::vector<Matrix> pre;     // pre-activations of hidden layers
  };

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  Eigen::Index num_params() const { return params_.size(); }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  /// LeCun-normal weights, zero biases; the last layer is additionally scaled.
  void init(Rng& rng, double output_scale = 1.0);

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;

  /// Accumulates dL/dparams into `grad` (same layout as params()); writes dL/dx when requested.
  void backward(const Cache& cache, const Matrix& dy, Eigen::Ref<Vector> grad, Matrix* dx = nullptr) const;

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;  // start of W for each layer
  Vector params_;
};

/// Kolmogorov-Arnold network with a Legendre basis on every edge. Each layer
/// squashes its input with tanh, expands P_0..P_D per input and mixes with a
/// coefficient matrix (out x in*(D+1)); P_0 carries the per-edge constant.
class Kan {
 public:
  Kan() = default;
  Kan(std::vector<int> sizes, int degree);

  struct Cache {
    std::vector<Matrix> squashed;  // tanh(input) per layer
    std::vector<Matrix> basis;     // (in*(D+1)) x batch per layer
  };

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int degree() const { return degree_; }
  const std::vector<int>& sizes() const { return sizes_; }
  Eigen::Index num_params() const { return params_.size(); }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  void init(Rng& rng, double output_scale = 1.0);

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Matrix& dy, Eigen::Ref<Vector> grad, Matrix* dx = nullptr) const;

 private:
  std::vector<int> sizes_;
  int degree_ = 0;
  std::vector<Eigen::Index> offsets_;
  Vector params_;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(Vector& params, const Vector& grad) = 0;
  virtual void reset(Eigen::Index n) = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(Vector& params, const Vector& grad) override;
  void reset(Eigen::Index n) override;
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  Vector m_, v_;
  long t_ = 0;
};

}  // namespace hammer::nn
