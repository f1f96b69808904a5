#pragma once

// Dense multilayer perceptron with GELU hidden activations and a linear
// output layer, written against Eigen for the matrix work but with forward,
// reverse-mode gradients, Adam and soft target updates implemented here.
// Batches are stored column-wise (one sample per column).

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "exotwin/rng.hpp"

namespace exotwin {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// tanh-approximation GELU: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
double gelu(double x);
double gelu_grad(double x);

class Mlp;

/// Per-layer parameter gradients, shaped like the owning network.
struct MlpGrads {
  std::vector<Matrix> w;
  std::vector<Vector> b;

  void set_zero();
  void scale(double factor);
};

/// First/second Adam moments per parameter tensor plus the shared step count.
struct AdamState {
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b;
  std::int64_t t = 0;
};

class Mlp {
 public:
  Mlp() = default;

  /// dims front to back, e.g. {34, 64, 64, 2}. Weights and biases start
  /// uniform in +-sqrt(1/fan_in), drawn row-by-row from `rng`.
  Mlp(std::vector<int> dims, Rng& rng);

  /// Zero-initialized network, the shell load_params() fills.
  explicit Mlp(std::vector<int> dims);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t layer_count() const { return w_.size(); }
  std::size_t parameter_count() const;

  /// Intermediate values of one forward pass, consumed by backward().
  struct Cache {
    Matrix input;
    std::vector<Matrix> pre;  // pre-activations per layer
    std::vector<Matrix> act;  // post-activations per hidden layer
  };

  Matrix forward(const Matrix& input) const;
  Matrix forward(const Matrix& input, Cache& cache) const;

  /// Accumulates parameter gradients for dL/doutput into `grads` and
  /// returns dL/dinput. Throws if the cache shape does not match.
  Matrix backward(const Cache& cache, const Matrix& doutput,
                  MlpGrads& grads) const;

  MlpGrads make_grads() const;
  AdamState make_adam_state() const;

  /// Adam with bias correction; beta1 0.9, beta2 0.999, eps 1e-8.
  void adam_step(const MlpGrads& grads, AdamState& state, double lr);

  /// this <- tau * online + (1 - tau) * this, elementwise.
  void soft_update_from(const Mlp& online, double tau);

  /// Parameters in serialization order (per layer: weight matrix row-major,
  /// then bias), narrowed to float.
  void append_params(std::vector<float>& out) const;
  /// Reads parameter_count() floats back in the same order.
  void load_params(const float* data, std::size_t count);

  const std::vector<Matrix>& weights() const { return w_; }
  const std::vector<Vector>& biases() const { return b_; }
  std::vector<Matrix>& weights() { return w_; }
  std::vector<Vector>& biases() { return b_; }

 private:
  std::vector<int> dims_;
  std::vector<Matrix> w_;  // w_[l] maps dims_[l] -> dims_[l+1]
  std::vector<Vector> b_;
};

}  // namespace exotwin
