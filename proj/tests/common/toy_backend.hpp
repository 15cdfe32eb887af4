#pragma once

#include "hammer/icem.hpp"

#include <cmath>

namespace hammer::testing {

/// Integrator toy: q <- q + step * a per joint; reward per step
/// offset - sum|q - q*| - smooth * sum|a_t - a_{t-1}|.
class ToyBackend final : public PlanBackend {
 public:
  ToyBackend(Eigen::VectorXd q0, Eigen::VectorXd target, double step = 0.1, double offset = 2.0, double smooth = 0.1)
      : q0_(std::move(q0)), target_(std::move(target)), step_(step), offset_(offset), smooth_(smooth) {}

  int act_dim() const override { return int(q0_.size()); }

  double score(const Eigen::MatrixXi& seq, double gamma) const {
    Eigen::VectorXd q = q0_;
    Eigen::VectorXi prev = Eigen::VectorXi::Zero(q.size());
    double ret = 0.0, disc = 1.0;
    for (Eigen::Index t = 0; t < seq.rows(); ++t) {
      const Eigen::VectorXi a = seq.row(t).transpose();
      q += step_ * a.cast<double>();
      ret += disc * (offset_ - (q - target_).cwiseAbs().sum() - smooth_ * (a - prev).cwiseAbs().sum());
      prev = a;
      disc *= gamma;
    }
    return ret;
  }

  Eigen::VectorXd evaluate(const std::vector<Eigen::MatrixXi>& seqs, double gamma) const override {
    Eigen::VectorXd r(Eigen::Index(seqs.size()));
    for (std::size_t i = 0; i < seqs.size(); ++i) r[Eigen::Index(i)] = score(seqs[i], gamma);
    return r;
  }

  /// Exhaustive search over {-1,0,1}^(horizon x act_dim); returns the best return
  /// and writes the best sequence.
  double brute_force(int horizon, double gamma, Eigen::MatrixXi* best_seq = nullptr) const {
    const int d = act_dim();
    const int cells = horizon * d;
    long total = 1;
    for (int i = 0; i < cells; ++i) total *= 3;
    double best = -INFINITY;
    Eigen::MatrixXi seq(horizon, d);
    for (long code = 0; code < total; ++code) {
      long c = code;
      for (int i = 0; i < cells; ++i) {
        seq(i / d, i % d) = int(c % 3) - 1;
        c /= 3;
      }
      const double s = score(seq, gamma);
      if (s > best) {
        best = s;
        if (best_seq) *best_seq = seq;
      }
    }
    return best;
  }

 private:
  Eigen::VectorXd q0_, target_;
  double step_, offset_, smooth_;
};

}  // namespace hammer::testing
