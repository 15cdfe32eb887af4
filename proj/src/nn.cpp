#include "hammer/nn.hpp"

#include <cmath>

namespace hammer::nn {

std::vector<double> legendre(double x, int degree) {
  require(degree >= 0, "legendre: degree must be >= 0");
  std::vector<double> p(std::size_t(degree) + 1);
  p[0] = 1.0;
  if (degree >= 1) p[1] = x;
  for (int n = 1; n < degree; ++n)
    p[std::size_t(n + 1)] = ((2.0 * n + 1.0) * x * p[std::size_t(n)] - n * p[std::size_t(n - 1)]) / (n + 1.0);
  return p;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

void fill_normal(Eigen::Ref<Vector> v, Rng& rng, double std) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std * standard_normal(rng);
}

}  // namespace

// ---------------------------------------------------------------- Mlp

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  require(sizes_.size() >= 2, "mlp: need at least input and output sizes");
  for (int s : sizes_) require(s > 0, "mlp: layer sizes must be > 0");
  Eigen::Index n = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(n);
    n += Eigen::Index(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_ = Vector::Zero(n);
}

void Mlp::init(Rng& rng, double output_scale) {
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const double scale = (l + 1 == layers) ? output_scale : 1.0;
    fill_normal(params_.segment(offsets_[l], Eigen::Index(out) * in), rng, scale / std::sqrt(double(in)));
    params_.segment(offsets_[l] + Eigen::Index(out) * in, out).setZero();
  }
}

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
  require(x.rows() == input_dim(), "mlp: input dimension mismatch");
  const std::size_t layers = sizes_.size() - 1;
  if (cache) {
    cache->inputs.resize(layers);
    cache->pre.resize(layers - 1);
  }
  Matrix h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    Eigen::Map<const Matrix> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<const Vector> b(params_.data() + offsets_[l] + Eigen::Index(out) * in, out);
    Matrix z = w * h;
    z.colwise() += b;
    if (cache) cache->inputs[l] = std::move(h);
    if (l + 1 == layers) return z;
    h = z.unaryExpr([](double v) { return silu(v); });
    if (cache) cache->pre[l] = std::move(z);
  }
  return h;  // unreachable
}

void Mlp::backward(const Cache& cache, const Matrix& dy, Eigen::Ref<Vector> grad, Matrix* dx) const {
  const std::size_t layers = sizes_.size() - 1;
  Matrix d = dy;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l], out = sizes_[l + 1];
    Eigen::Map<const Matrix> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<Matrix> gw(grad.data() + offsets_[l], out, in);
    gw.noalias() += d * cache.inputs[l].transpose();
    grad.segment(offsets_[l] + Eigen::Index(out) * in, out) += d.rowwise().sum();
    if (l == 0 && dx == nullptr) break;
    Matrix dh = w.transpose() * d;
    if (l == 0) {
      *dx = std::move(dh);
      break;
    }
    d = dh.cwiseProduct(cache.pre[l - 1].unaryExpr([](double z) { return silu_grad(z); }));
  }
}

// ---------------------------------------------------------------- Kan

Kan::Kan(std::vector<int> sizes, int degree) : sizes_(std::move(sizes)), degree_(degree) {
  require(sizes_.size() >= 2, "kan: need at least input and output sizes");
  require(degree_ >= 1, "kan: basis degree must be >= 1");
  for (int s : sizes_) require(s > 0, "kan: layer sizes must be > 0");
  Eigen::Index n = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(n);
    n += Eigen::Index(sizes_[l + 1]) * sizes_[l] * (degree_ + 1);
  }
  params_ = Vector::Zero(n);
}

void Kan::init(Rng& rng, double output_scale) {
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::Index fan_in = Eigen::Index(sizes_[l]) * (degree_ + 1);
    const double scale = (l + 1 == layers) ? output_scale : 1.0;
    fill_normal(params_.segment(offsets_[l], fan_in * sizes_[l + 1]), rng, scale / std::sqrt(double(fan_in)));
  }
}

Matrix Kan::forward(const Matrix& x, Cache* cache) const {
  require(x.rows() == input_dim(), "kan: input dimension mismatch");
  const std::size_t layers = sizes_.size() - 1;
  const int nb = degree_ + 1;
  if (cache) {
    cache->squashed.resize(layers);
    cache->basis.resize(layers);
  }
  Matrix h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    Matrix u = h.array().tanh().matrix();
    Matrix phi(Eigen::Index(in) * nb, u.cols());
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      for (int i = 0; i < in; ++i) {
        const double t = u(i, c);
        const Eigen::Index r = Eigen::Index(i) * nb;
        phi(r, c) = 1.0;
        phi(r + 1, c) = t;
        for (int n = 1; n < degree_; ++n)
          phi(r + n + 1, c) = ((2.0 * n + 1.0) * t * phi(r + n, c) - n * phi(r + n - 1, c)) / (n + 1.0);
      }
    }
    Eigen::Map<const Matrix> coef(params_.data() + offsets_[l], out, Eigen::Index(in) * nb);
    h = coef * phi;
    if (cache) {
      cache->squashed[l] = std::move(u);
      cache->basis[l] = std::move(phi);
    }
  }
  return h;
}

void Kan::backward(const Cache& cache, const Matrix& dy, Eigen::Ref<Vector> grad, Matrix* dx) const {
  const std::size_t layers = sizes_.size() - 1;
  const int nb = degree_ + 1;
  std::vector<double> dp(static_cast<std::size_t>(nb));
  Matrix d = dy;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l], out = sizes_[l + 1];
    Eigen::Map<const Matrix> coef(params_.data() + offsets_[l], out, Eigen::Index(in) * nb);
    Eigen::Map<Matrix> gcoef(grad.data() + offsets_[l], out, Eigen::Index(in) * nb);
    const Matrix& phi = cache.basis[l];
    gcoef.noalias() += d * phi.transpose();
    if (l == 0 && dx == nullptr) break;

    const Matrix dphi = coef.transpose() * d;
    const Matrix& u = cache.squashed[l];
    Matrix dh(in, u.cols());
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      for (int i = 0; i < in; ++i) {
        const double t = u(i, c);
        const Eigen::Index r = Eigen::Index(i) * nb;
        // P'_{n+1} = ((2n+1)(P_n + t P'_n) - n P'_{n-1}) / (n+1)
        dp[0] = 0.0;
        dp[1] = 1.0;
        for (int n = 1; n < degree_; ++n)
          dp[std::size_t(n + 1)] =
              ((2.0 * n + 1.0) * (phi(r + n, c) + t * dp[std::size_t(n)]) - n * dp[std::size_t(n - 1)]) / (n + 1.0);
        double acc = 0.0;
        for (int n = 1; n < nb; ++n) acc += dphi(r + n, c) * dp[std::size_t(n)];
        dh(i, c) = acc * (1.0 - t * t);
      }
    }
    if (l == 0) {
      *dx = std::move(dh);
      break;
    }
    d = std::move(dh);
  }
}

// ---------------------------------------------------------------- Adam

void Adam::reset(Eigen::Index n) {
  m_ = Vector::Zero(n);
  v_ = Vector::Zero(n);
  t_ = 0;
}

void Adam::step(Vector& params, const Vector& grad) {
  if (m_.size() != params.size()) reset(params.size());
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  params.array() -= cfg_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
}

}  // namespace hammer::nn
