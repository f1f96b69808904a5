#include "exotwin/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace exotwin {

namespace {

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

}  // namespace

double gelu(double x) {
  const double u = kGeluScale * (x + kGeluCubic * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad(double x) {
  const double u = kGeluScale * (x + kGeluCubic * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluScale * (1.0 + 3.0 * kGeluCubic * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

void MlpGrads::set_zero() {
  for (Matrix& g : w) g.setZero();
  for (Vector& g : b) g.setZero();
}

void MlpGrads::scale(double factor) {
  for (Matrix& g : w) g *= factor;
  for (Vector& g : b) g *= factor;
}

Mlp::Mlp(std::vector<int> dims, Rng& rng) : dims_(std::move(dims)) {
  if (dims_.size() < 2)
    throw std::invalid_argument("mlp: need at least input and output dims");
  for (int d : dims_)
    if (d <= 0) throw std::invalid_argument("mlp: dims must be positive");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const int fan_in = dims_[l];
    const int fan_out = dims_[l + 1];
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = dist(rng);
    Vector b(fan_out);
    for (int r = 0; r < fan_out; ++r) b(r) = dist(rng);
    w_.push_back(std::move(w));
    b_.push_back(std::move(b));
  }
}

Mlp::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2)
    throw std::invalid_argument("mlp: need at least input and output dims");
  for (int d : dims_)
    if (d <= 0) throw std::invalid_argument("mlp: dims must be positive");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    w_.push_back(Matrix::Zero(dims_[l + 1], dims_[l]));
    b_.push_back(Vector::Zero(dims_[l + 1]));
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < w_.size(); ++l)
    n += static_cast<std::size_t>(w_[l].size()) +
         static_cast<std::size_t>(b_[l].size());
  return n;
}

Matrix Mlp::forward(const Matrix& input) const {
  Cache cache;
  return forward(input, cache);
}

Matrix Mlp::forward(const Matrix& input, Cache& cache) const {
  if (input.rows() != dims_.front())
    throw std::invalid_argument("mlp forward: input dimension mismatch");
  cache.input = input;
  cache.pre.clear();
  cache.act.clear();
  Matrix a = input;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    Matrix z = (w_[l] * a).colwise() + b_[l];
    cache.pre.push_back(z);
    if (l + 1 < w_.size()) {
      a = z.unaryExpr([](double x) { return gelu(x); });
      cache.act.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& doutput,
                     MlpGrads& grads) const {
  if (cache.pre.size() != w_.size())
    throw std::invalid_argument("mlp backward: stale or foreign cache");
  if (doutput.rows() != dims_.back() ||
      doutput.cols() != cache.input.cols())
    throw std::invalid_argument("mlp backward: gradient shape mismatch");

  Matrix delta = doutput;  // gradient at the current layer's pre-activation
  for (std::size_t l = w_.size(); l-- > 0;) {
    const Matrix& below = l == 0 ? cache.input : cache.act[l - 1];
    grads.w[l].noalias() += delta * below.transpose();
    grads.b[l] += delta.rowwise().sum();
    Matrix dbelow = w_[l].transpose() * delta;
    if (l == 0) return dbelow;
    delta = dbelow.cwiseProduct(
        cache.pre[l - 1].unaryExpr([](double x) { return gelu_grad(x); }));
  }
  return Matrix{};  // unreachable
}

MlpGrads Mlp::make_grads() const {
  MlpGrads g;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    g.w.push_back(Matrix::Zero(w_[l].rows(), w_[l].cols()));
    g.b.push_back(Vector::Zero(b_[l].size()));
  }
  return g;
}

AdamState Mlp::make_adam_state() const {
  AdamState s;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    s.m_w.push_back(Matrix::Zero(w_[l].rows(), w_[l].cols()));
    s.v_w.push_back(Matrix::Zero(w_[l].rows(), w_[l].cols()));
    s.m_b.push_back(Vector::Zero(b_[l].size()));
    s.v_b.push_back(Vector::Zero(b_[l].size()));
  }
  return s;
}

void Mlp::adam_step(const MlpGrads& grads, AdamState& state, double lr) {
  if (grads.w.size() != w_.size() || state.m_w.size() != w_.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
  for (std::size_t l = 0; l < w_.size(); ++l) {
    state.m_w[l] = kAdamBeta1 * state.m_w[l] + (1.0 - kAdamBeta1) * grads.w[l];
    state.v_w[l].array() = kAdamBeta2 * state.v_w[l].array() +
                           (1.0 - kAdamBeta2) * grads.w[l].array().square();
    w_[l].array() -=
        lr * (state.m_w[l].array() / bc1) /
        ((state.v_w[l].array() / bc2).sqrt() + kAdamEps);
    state.m_b[l] = kAdamBeta1 * state.m_b[l] + (1.0 - kAdamBeta1) * grads.b[l];
    state.v_b[l].array() = kAdamBeta2 * state.v_b[l].array() +
                           (1.0 - kAdamBeta2) * grads.b[l].array().square();
    b_[l].array() -=
        lr * (state.m_b[l].array() / bc1) /
        ((state.v_b[l].array() / bc2).sqrt() + kAdamEps);
  }
}

void Mlp::soft_update_from(const Mlp& online, double tau) {
  if (online.dims_ != dims_)
    throw std::invalid_argument("soft_update: network shapes differ");
  for (std::size_t l = 0; l < w_.size(); ++l) {
    w_[l] = tau * online.w_[l] + (1.0 - tau) * w_[l];
    b_[l] = tau * online.b_[l] + (1.0 - tau) * b_[l];
  }
}

void Mlp::append_params(std::vector<float>& out) const {
  for (std::size_t l = 0; l < w_.size(); ++l) {
    for (Eigen::Index r = 0; r < w_[l].rows(); ++r)
      for (Eigen::Index c = 0; c < w_[l].cols(); ++c)
        out.push_back(static_cast<float>(w_[l](r, c)));
    for (Eigen::Index r = 0; r < b_[l].size(); ++r)
      out.push_back(static_cast<float>(b_[l](r)));
  }
}

void Mlp::load_params(const float* data, std::size_t count) {
  if (count != parameter_count())
    throw std::invalid_argument("mlp load: parameter count mismatch");
  std::size_t i = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    for (Eigen::Index r = 0; r < w_[l].rows(); ++r)
      for (Eigen::Index c = 0; c < w_[l].cols(); ++c)
        w_[l](r, c) = static_cast<double>(data[i++]);
    for (Eigen::Index r = 0; r < b_[l].size(); ++r)
      b_[l](r) = static_cast<double>(data[i++]);
  }
}

}  // namespace exotwin
