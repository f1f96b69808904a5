// Learning-stack suite: MLP forward/backward against finite differences,
// Adam, soft target updates, the squashed-Gaussian policy, critic targets,
// the combined gradient step, replay storage, checkpoints and the training
// loop scaffolding.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "exotwin/mlp.hpp"
#include "exotwin/replay_buffer.hpp"
#include "exotwin/rng.hpp"
#include "exotwin/sac.hpp"

using namespace exotwin;

namespace {

constexpr double kPi = 3.14159265358979323846;

Matrix random_matrix(int rows, int cols, Rng& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

/// Scalar loss sum_ij D_ij out_ij whose output gradient is exactly D.
double weighted_output_sum(const Mlp& net, const Matrix& input,
                           const Matrix& d) {
  return (net.forward(input).array() * d.array()).sum();
}

std::vector<double*> parameter_pointers(Mlp& net) {
  std::vector<double*> ptrs;
  for (Matrix& w : net.weights())
    for (Eigen::Index i = 0; i < w.size(); ++i) ptrs.push_back(w.data() + i);
  for (Vector& b : net.biases())
    for (Eigen::Index i = 0; i < b.size(); ++i) ptrs.push_back(b.data() + i);
  return ptrs;
}

std::vector<double> gradient_values(const Mlp& net, const MlpGrads& grads) {
  std::vector<double> vals;
  for (const Matrix& w : grads.w)
    for (Eigen::Index i = 0; i < w.size(); ++i) vals.push_back(w.data()[i]);
  for (const Vector& b : grads.b)
    for (Eigen::Index i = 0; i < b.size(); ++i) vals.push_back(b.data()[i]);
  return vals;
}

std::vector<float> serialized(const SacNetworks& nets) {
  std::vector<float> out;
  nets.actor.append_params(out);
  nets.critic1.append_params(out);
  nets.critic2.append_params(out);
  nets.target1.append_params(out);
  nets.target2.append_params(out);
  return out;
}

Transition make_transition(Rng& rng, bool done = false) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Transition t;
  for (double& v : t.obs) v = dist(rng);
  for (double& v : t.next_obs) v = dist(rng);
  t.action = dist(rng);
  t.reward = dist(rng);
  t.done = done;
  return t;
}

/// Networks whose actor emits a constant (mean, log_std) and whose critics
/// emit constant values, so targets have a closed form.
SacNetworks constant_networks(double mean, double log_std, double q1,
                              double q2, double log_alpha) {
  SacNetworks nets;
  nets.actor = Mlp({kObservationDim, 2});
  nets.actor.biases()[0] << mean, log_std;
  nets.critic1 = Mlp({kObservationDim + 1, 1});
  nets.critic2 = Mlp({kObservationDim + 1, 1});
  nets.target1 = Mlp({kObservationDim + 1, 1});
  nets.target2 = Mlp({kObservationDim + 1, 1});
  nets.target1.biases()[0] << q1;
  nets.target2.biases()[0] << q2;
  nets.log_alpha = log_alpha;
  return nets;
}

}  // namespace

// ---------------------------------------------------------------------------
// GELU

TEST_CASE("gelu matches its defining expression and limits") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(10.0) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(std::fabs(gelu(-10.0)) < 1e-6);
  for (double x : {-2.0, -0.7, 0.3, 1.0, 2.5}) {
    const double inner = std::sqrt(2.0 / kPi) * (x + 0.044715 * x * x * x);
    const double expected = 0.5 * x * (1.0 + std::tanh(inner));
    CHECK(gelu(x) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("gelu_grad agrees with central differences") {
  const double h = 1e-6;
  for (double x : {-3.0, -1.0, -0.25, 0.0, 0.5, 1.0, 2.0, 4.0}) {
    const double fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
    CHECK(gelu_grad(x) == doctest::Approx(fd).epsilon(1e-6));
  }
}

// ---------------------------------------------------------------------------
// MLP forward

TEST_CASE("a zero-initialized shell maps everything to zero") {
  Mlp net({3, 4, 2});
  Rng rng = make_rng(1);
  const Matrix out = net.forward(random_matrix(3, 5, rng));
  CHECK(out.rows() == 2);
  CHECK(out.cols() == 5);
  for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.0);
}

TEST_CASE("a single linear layer reproduces the affine map exactly") {
  Mlp net({2, 1});
  net.weights()[0] << 2.0, -3.0;
  net.biases()[0] << 0.5;
  Matrix x(2, 3);
  x << 1.0, 0.0, -2.0,
       0.0, 1.0, 0.25;
  const Matrix out = net.forward(x);
  CHECK(out(0, 0) == 2.5);
  CHECK(out(0, 1) == -2.5);
  CHECK(out(0, 2) == doctest::Approx(-4.0 - 0.75 + 0.5).epsilon(1e-15));
}

TEST_CASE("a one-hidden-unit network composes gelu by hand") {
  Mlp net({1, 1, 1});
  net.weights()[0] << 1.7;
  net.biases()[0] << -0.3;
  net.weights()[1] << 2.0;
  net.biases()[1] << 0.1;
  for (double x : {-1.0, 0.0, 0.4, 2.0}) {
    Matrix in(1, 1);
    in(0, 0) = x;
    const double expected = 2.0 * gelu(1.7 * x - 0.3) + 0.1;
    CHECK(net.forward(in)(0, 0) == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("forward with and without a cache agree bit for bit") {
  Rng rng = make_rng(7);
  Mlp net({4, 6, 6, 3}, rng);
  const Matrix x = random_matrix(4, 5, rng);
  Mlp::Cache cache;
  const Matrix a = net.forward(x);
  const Matrix b = net.forward(x, cache);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("initial parameters stay inside the fan-in bound") {
  Rng rng = make_rng(100);
  Mlp net({100, 50}, rng);
  const double bound = std::sqrt(1.0 / 100.0);
  double mean = 0.0;
  for (Eigen::Index i = 0; i < net.weights()[0].size(); ++i) {
    const double w = net.weights()[0].data()[i];
    CHECK(std::fabs(w) <= bound);
    mean += w;
  }
  mean /= static_cast<double>(net.weights()[0].size());
  CHECK(std::fabs(mean) < 0.005);
  CHECK(net.parameter_count() == 100 * 50 + 50);
}

TEST_CASE("structural validation of dimensions and inputs") {
  CHECK_THROWS_AS(Mlp({3}), std::invalid_argument);
  CHECK_THROWS_AS(Mlp({3, 0, 2}), std::invalid_argument);
  Mlp net({3, 2});
  Rng rng = make_rng(2);
  CHECK_THROWS_AS(net.forward(random_matrix(4, 1, rng)),
                  std::invalid_argument);
  CHECK(Mlp({3, 4, 2}).parameter_count() == 3 * 4 + 4 + 4 * 2 + 2);
}

// ---------------------------------------------------------------------------
// MLP backward

TEST_CASE("backward matches finite differences on random small networks") {
  Rng rng = make_rng(2025);
  std::uniform_int_distribution<int> depth(2, 4);
  std::uniform_int_distribution<int> width(1, 4);
  const double h = 1e-5;

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> dims(static_cast<std::size_t>(depth(rng)) + 1);
    for (int& d : dims) d = width(rng);
    Mlp net(dims, rng);
    const Matrix x = random_matrix(dims.front(), 3, rng);
    const Matrix d = random_matrix(dims.back(), 3, rng);

    Mlp::Cache cache;
    net.forward(x, cache);
    MlpGrads grads = net.make_grads();
    const Matrix dinput = net.backward(cache, d, grads);
    const std::vector<double> analytic = gradient_values(net, grads);
    const std::vector<double*> params = parameter_pointers(net);
    REQUIRE(analytic.size() == params.size());

    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = *params[i];
      *params[i] = saved + h;
      const double up = weighted_output_sum(net, x, d);
      *params[i] = saved - h;
      const double down = weighted_output_sum(net, x, d);
      *params[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double scale = std::max(std::fabs(analytic[i]), 1e-6);
      CHECK(std::fabs(fd - analytic[i]) <= 1e-4 * scale);
    }

    // Input gradient, same stencil.
    Matrix xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double saved = xp.data()[i];
      xp.data()[i] = saved + h;
      const double up = weighted_output_sum(net, xp, d);
      xp.data()[i] = saved - h;
      const double down = weighted_output_sum(net, xp, d);
      xp.data()[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double scale = std::max(std::fabs(dinput.data()[i]), 1e-6);
      CHECK(std::fabs(fd - dinput.data()[i]) <= 1e-4 * scale);
    }
  }
}

TEST_CASE("a zero output gradient produces zero parameter gradients") {
  Rng rng = make_rng(12);
  Mlp net({3, 5, 2}, rng);
  const Matrix x = random_matrix(3, 4, rng);
  Mlp::Cache cache;
  net.forward(x, cache);
  MlpGrads grads = net.make_grads();
  const Matrix dinput = net.backward(cache, Matrix::Zero(2, 4), grads);
  for (double g : gradient_values(net, grads)) CHECK(g == 0.0);
  for (Eigen::Index i = 0; i < dinput.size(); ++i)
    CHECK(dinput.data()[i] == 0.0);
}

TEST_CASE("squared-error gradients of a linear layer in closed form") {
  Mlp net({2, 1});
  net.weights()[0] << 1.5, -0.5;
  net.biases()[0] << 0.25;
  Matrix x(2, 1);
  x << 0.8, -0.4;
  const double y = 2.0;
  Mlp::Cache cache;
  const double out = net.forward(x, cache)(0, 0);
  Matrix dout(1, 1);
  dout(0, 0) = 2.0 * (out - y);
  MlpGrads grads = net.make_grads();
  net.backward(cache, dout, grads);
  CHECK(grads.w[0](0, 0) == doctest::Approx(2.0 * (out - y) * 0.8)
                                .epsilon(1e-15));
  CHECK(grads.w[0](0, 1) == doctest::Approx(2.0 * (out - y) * -0.4)
                                .epsilon(1e-15));
  CHECK(grads.b[0](0) == doctest::Approx(2.0 * (out - y)).epsilon(1e-15));
}

TEST_CASE("backward rejects mismatched caches and gradients") {
  Rng rng = make_rng(3);
  Mlp net({3, 4, 2}, rng);
  Mlp::Cache cache;
  net.forward(random_matrix(3, 3, rng), cache);
  MlpGrads grads = net.make_grads();
  CHECK_THROWS_AS(net.backward(cache, random_matrix(2, 2, rng), grads),
                  std::invalid_argument);
  CHECK_THROWS_AS(net.backward(cache, random_matrix(3, 3, rng), grads),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Adam

TEST_CASE("adam ignores a zero gradient") {
  Rng rng = make_rng(41);
  Mlp net({2, 3, 1}, rng);
  const Mlp before = net;
  MlpGrads grads = net.make_grads();
  grads.set_zero();
  AdamState state = net.make_adam_state();
  net.adam_step(grads, state, 1e-2);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (Eigen::Index i = 0; i < net.weights()[l].size(); ++i)
      CHECK(net.weights()[l].data()[i] == before.weights()[l].data()[i]);
    for (Eigen::Index i = 0; i < net.biases()[l].size(); ++i)
      CHECK(net.biases()[l].data()[i] == before.biases()[l].data()[i]);
  }
  CHECK(state.t == 1);
}

TEST_CASE("the first adam step moves by the bias-corrected unit step") {
  Rng rng = make_rng(42);
  Mlp net({2, 2}, rng);
  const Mlp before = net;
  MlpGrads grads = net.make_grads();
  grads.set_zero();
  const double g = 0.7;
  for (Matrix& w : grads.w) w.setConstant(g);
  for (Vector& b : grads.b) b.setConstant(g);
  AdamState state = net.make_adam_state();
  const double lr = 1e-3;
  net.adam_step(grads, state, lr);
  // mhat = g, vhat = g^2, so the update is lr g / (|g| + eps).
  const double expected = lr * g / (std::fabs(g) + 1e-8);
  for (Eigen::Index i = 0; i < net.weights()[0].size(); ++i) {
    const double delta = before.weights()[0].data()[i] -
                         net.weights()[0].data()[i];
    CHECK(delta == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("adam is deterministic across identical runs") {
  Rng rng_a = make_rng(55);
  Rng rng_b = make_rng(55);
  Mlp a({3, 4, 1}, rng_a);
  Mlp b({3, 4, 1}, rng_b);
  AdamState sa = a.make_adam_state();
  AdamState sb = b.make_adam_state();
  Rng data_rng = make_rng(56);
  for (int k = 0; k < 10; ++k) {
    const Matrix x = random_matrix(3, 4, data_rng);
    const Matrix d = random_matrix(1, 4, data_rng);
    Mlp::Cache ca, cb;
    a.forward(x, ca);
    b.forward(x, cb);
    MlpGrads ga = a.make_grads();
    MlpGrads gb = b.make_grads();
    a.backward(ca, d, ga);
    b.backward(cb, d, gb);
    a.adam_step(ga, sa, 1e-3);
    b.adam_step(gb, sb, 1e-3);
  }
  for (std::size_t l = 0; l < a.layer_count(); ++l)
    for (Eigen::Index i = 0; i < a.weights()[l].size(); ++i)
      CHECK(a.weights()[l].data()[i] == b.weights()[l].data()[i]);
}

// ---------------------------------------------------------------------------
// Soft target updates

TEST_CASE("soft updates interpolate between target and online parameters") {
  Rng rng = make_rng(60);
  Mlp online({3, 4, 2}, rng);
  Mlp target({3, 4, 2}, rng);
  const Mlp frozen = target;

  Mlp t0 = target;
  t0.soft_update_from(online, 0.0);
  for (std::size_t l = 0; l < t0.layer_count(); ++l)
    for (Eigen::Index i = 0; i < t0.weights()[l].size(); ++i)
      CHECK(t0.weights()[l].data()[i] == frozen.weights()[l].data()[i]);

  Mlp t1 = target;
  t1.soft_update_from(online, 1.0);
  for (std::size_t l = 0; l < t1.layer_count(); ++l)
    for (Eigen::Index i = 0; i < t1.weights()[l].size(); ++i)
      CHECK(t1.weights()[l].data()[i] == online.weights()[l].data()[i]);

  Mlp tm = target;
  tm.soft_update_from(online, 0.05);
  for (std::size_t l = 0; l < tm.layer_count(); ++l) {
    for (Eigen::Index i = 0; i < tm.weights()[l].size(); ++i) {
      const double expected = 0.05 * online.weights()[l].data()[i] +
                              0.95 * frozen.weights()[l].data()[i];
      CHECK(tm.weights()[l].data()[i] ==
            doctest::Approx(expected).epsilon(1e-15));
    }
  }
}

TEST_CASE("repeated soft updates contract onto the online network") {
  Rng rng = make_rng(61);
  Mlp online({2, 3, 1}, rng);
  Mlp target({2, 3, 1}, rng);
  double initial_gap = 0.0;
  for (std::size_t l = 0; l < target.layer_count(); ++l)
    for (Eigen::Index i = 0; i < target.weights()[l].size(); ++i)
      initial_gap = std::max(initial_gap,
                             std::fabs(target.weights()[l].data()[i] -
                                       online.weights()[l].data()[i]));
  for (int k = 0; k < 200; ++k) target.soft_update_from(online, 0.05);
  const double shrink = std::pow(0.95, 200);
  for (std::size_t l = 0; l < target.layer_count(); ++l)
    for (Eigen::Index i = 0; i < target.weights()[l].size(); ++i)
      CHECK(std::fabs(target.weights()[l].data()[i] -
                      online.weights()[l].data()[i]) <=
            shrink * initial_gap + 1e-12);
}

TEST_CASE("mismatched shapes cannot be soft-updated or loaded") {
  Rng rng = make_rng(62);
  Mlp a({3, 4, 2}, rng);
  Mlp b({3, 5, 2}, rng);
  CHECK_THROWS_AS(a.soft_update_from(b, 0.5), std::invalid_argument);
  std::vector<float> params;
  a.append_params(params);
  CHECK_THROWS_AS(b.load_params(params.data(), params.size()),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Squashed-Gaussian policy

TEST_CASE("sampled actions are the tanh of the reparameterized draw") {
  Rng init = make_rng(70);
  Mlp actor({kObservationDim, 8, 2}, init);
  Rng rng = make_rng(71);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    Observation obs{};
    for (double& v : obs) v = dist(rng);
    const ActionSample s = sample_action(actor, obs, rng);
    const double z = s.mean + std::exp(s.log_std) * s.noise;
    CHECK(s.action == std::tanh(z));
    CHECK(s.log_prob == squashed_log_prob(z, s.mean, s.log_std));
    CHECK(s.action > -1.0);
    CHECK(s.action < 1.0);
    CHECK(s.log_std >= kLogStdMin);
    CHECK(s.log_std <= kLogStdMax);
  }
}

TEST_CASE("the deterministic action is the squashed mean") {
  Rng init = make_rng(72);
  Mlp actor({kObservationDim, 8, 2}, init);
  Observation obs{};
  obs[0] = 0.9;
  obs[31] = -0.4;
  Matrix in(kObservationDim, 1);
  for (int d = 0; d < kObservationDim; ++d) in(d, 0) = obs[d];
  CHECK(deterministic_action(actor, obs) ==
        std::tanh(actor.forward(in)(0, 0)));
}

TEST_CASE("a collapsed policy reduces to its squashed mean") {
  SacNetworks nets = constant_networks(0.4, -30.0, 0.0, 0.0, 0.0);
  Rng rng = make_rng(73);
  Observation obs{};
  const ActionSample s = sample_action(nets.actor, obs, rng);
  CHECK(s.log_std == kLogStdMin);
  CHECK(std::fabs(s.action - std::tanh(0.4)) < 1e-6);
}

TEST_CASE("the squashed density integrates to one over the action range") {
  for (const auto& [mean, log_std] : {std::pair{0.0, 0.0},
                                      std::pair{0.8, -1.0},
                                      std::pair{-1.5, 0.3}}) {
    const double sigma = std::exp(log_std);
    const double lo = mean - 8.0 * sigma;
    const double hi = mean + 8.0 * sigma;
    const int n = 20000;
    const double dz = (hi - lo) / n;
    double integral = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double z = lo + dz * i;
      const double t = std::tanh(z);
      // p(a) da = p(a(z)) sech^2(z) dz recovers the Gaussian in z.
      const double density = std::exp(squashed_log_prob(z, mean, log_std)) *
                             (1.0 - t * t);
      integral += density * dz * ((i == 0 || i == n) ? 0.5 : 1.0);
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
  }
}

// ---------------------------------------------------------------------------
// Critic targets

TEST_CASE("terminal transitions pass rewards through unchanged") {
  Rng rng = make_rng(80);
  SacHyperparams hp;
  hp.hidden_width = 8;
  SacNetworks nets = make_networks(kObservationDim, hp, rng);
  std::vector<Transition> batch;
  std::vector<double> noise;
  for (int i = 0; i < 5; ++i) {
    batch.push_back(make_transition(rng, true));
    noise.push_back(0.3 * i);
  }
  const Vector y = compute_critic_targets(nets, batch, noise, hp);
  for (int i = 0; i < 5; ++i) CHECK(y(i) == batch[i].reward);
}

TEST_CASE("a zero discount reduces targets to the immediate reward") {
  Rng rng = make_rng(81);
  SacHyperparams hp;
  hp.hidden_width = 8;
  SacNetworks nets = make_networks(kObservationDim, hp, rng);
  hp.gamma = 0.0;
  std::vector<Transition> batch;
  std::vector<double> noise;
  for (int i = 0; i < 5; ++i) {
    batch.push_back(make_transition(rng, false));
    noise.push_back(-0.2 * i);
  }
  const Vector y = compute_critic_targets(nets, batch, noise, hp);
  for (int i = 0; i < 5; ++i) CHECK(y(i) == batch[i].reward);
}

TEST_CASE("a constant-network target matches the hand-computed value") {
  const double mean = 0.3, log_std = -0.5, q1 = 2.0, q2 = 1.4;
  const double log_alpha = std::log(0.2);
  SacNetworks nets = constant_networks(mean, log_std, q1, q2, log_alpha);
  SacHyperparams hp;
  hp.gamma = 0.99;

  Rng rng = make_rng(82);
  std::vector<Transition> batch = {make_transition(rng, false)};
  const std::vector<double> noise = {0.7};
  const Vector y = compute_critic_targets(nets, batch, noise, hp);

  const double z = mean + std::exp(log_std) * 0.7;
  const double log_pi = squashed_log_prob(z, mean, log_std);
  const double expected =
      batch[0].reward + 0.99 * (std::min(q1, q2) - 0.2 * log_pi);
  CHECK(y(0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("targets are equivariant under batch permutation") {
  Rng rng = make_rng(83);
  SacHyperparams hp;
  hp.hidden_width = 8;
  SacNetworks nets = make_networks(kObservationDim, hp, rng);
  std::vector<Transition> batch;
  std::vector<double> noise;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 8; ++i) {
    batch.push_back(make_transition(rng, i % 3 == 0));
    noise.push_back(unit(rng));
  }
  const Vector y = compute_critic_targets(nets, batch, noise, hp);

  std::vector<Transition> rev(batch.rbegin(), batch.rend());
  std::vector<double> noise_rev(noise.rbegin(), noise.rend());
  const Vector y_rev = compute_critic_targets(nets, rev, noise_rev, hp);
  for (int i = 0; i < 8; ++i) CHECK(y_rev(i) == y(7 - i));
}

TEST_CASE("critic targets validate their inputs") {
  Rng rng = make_rng(84);
  SacHyperparams hp;
  hp.hidden_width = 8;
  SacNetworks nets = make_networks(kObservationDim, hp, rng);
  CHECK_THROWS_AS(compute_critic_targets(nets, {}, {}, hp),
                  std::invalid_argument);
  const std::vector<Transition> batch = {make_transition(rng)};
  CHECK_THROWS_AS(compute_critic_targets(nets, batch, {0.1, 0.2}, hp),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// The combined update

TEST_CASE("one gradient step updates every trained tensor") {
  Rng rng = make_rng(90);
  SacHyperparams hp;
  hp.hidden_width = 8;
  hp.batch_size = 16;
  SacNetworks nets = make_networks(kObservationDim, hp, rng);
  SacOptimizers opt = make_optimizers(nets);
  const std::vector<float> before = serialized(nets);
  const Mlp target1_before = nets.target1;
  const double log_alpha_before = nets.log_alpha;

  std::vector<Transition> batch;
  for (int i = 0; i < 16; ++i) batch.push_back(make_transition(rng, i == 7));
  Rng update_rng = make_rng(91);
  const Mlp critic1_before = nets.critic1;
  const UpdateDiagnostics diag = sac_update(nets, opt, batch, update_rng, hp);

  CHECK(diag.critic_loss >= 0.0);
  CHECK(std::isfinite(diag.actor_loss));
  CHECK(diag.alpha > 0.0);
  CHECK(diag.alpha == std::exp(nets.log_alpha));
  CHECK(std::isfinite(diag.entropy));
  CHECK(nets.log_alpha != log_alpha_before);

  const std::vector<float> after = serialized(nets);
  CHECK(after.size() == before.size());
  int changed = 0;
  for (std::size_t i = 0; i < after.size(); ++i)
    if (after[i] != before[i]) ++changed;
  CHECK(changed > static_cast<int>(after.size()) / 2);

  // The target moved toward the updated critic by exactly tau.
  for (std::size_t l = 0; l < nets.target1.layer_count(); ++l) {
    for (Eigen::Index i = 0; i < nets.target1.weights()[l].size(); ++i) {
      const double expected =
          hp.tau * nets.critic1.weights()[l].data()[i] +
          (1.0 - hp.tau) * target1_before.weights()[l].data()[i];
      CHECK(nets.target1.weights()[l].data()[i] ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
  (void)critic1_before;
}

TEST_CASE("updates are deterministic in networks, batch and stream") {
  Rng rng = make_rng(92);
  SacHyperparams hp;
  hp.hidden_width = 8;
  SacNetworks nets_a = make_networks(kObservationDim, hp, rng);
  SacNetworks nets_b = nets_a;
  SacOptimizers opt_a = make_optimizers(nets_a);
  SacOptimizers opt_b = make_optimizers(nets_b);
  std::vector<Transition> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(make_transition(rng));

  Rng ra = make_rng(93);
  Rng rb = make_rng(93);
  for (int k = 0; k < 3; ++k) {
    const UpdateDiagnostics da = sac_update(nets_a, opt_a, batch, ra, hp);
    const UpdateDiagnostics db = sac_update(nets_b, opt_b, batch, rb, hp);
    CHECK(da.critic_loss == db.critic_loss);
    CHECK(da.actor_loss == db.actor_loss);
    CHECK(da.alpha == db.alpha);
    CHECK(da.entropy == db.entropy);
  }
  const std::vector<float> pa = serialized(nets_a);
  const std::vector<float> pb = serialized(nets_b);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
}

TEST_CASE("the temperature tracks the entropy target from both sides") {
  Rng rng = make_rng(94);
  SacHyperparams hp;
  hp.hidden_width = 8;
  std::vector<Transition> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(make_transition(rng));

  SacNetworks low = make_networks(kObservationDim, hp, rng);
  SacOptimizers opt_low = make_optimizers(low);
  SacHyperparams want_more = hp;
  want_more.target_entropy = 5.0;  // unattainably high
  const double before_low = low.log_alpha;
  Rng r1 = make_rng(95);
  sac_update(low, opt_low, batch, r1, want_more);
  CHECK(low.log_alpha > before_low);

  SacNetworks high = make_networks(kObservationDim, hp, rng);
  SacOptimizers opt_high = make_optimizers(high);
  SacHyperparams want_less = hp;
  want_less.target_entropy = -50.0;
  const double before_high = high.log_alpha;
  Rng r2 = make_rng(96);
  sac_update(high, opt_high, batch, r2, want_less);
  CHECK(high.log_alpha < before_high);
}

TEST_CASE("soft_update with full tau copies the critics onto the targets") {
  Rng rng = make_rng(97);
  SacHyperparams hp;
  hp.hidden_width = 8;
  SacNetworks nets = make_networks(kObservationDim, hp, rng);
  // Desynchronize first.
  Rng rng2 = make_rng(98);
  nets.target1 = Mlp(nets.critic1.dims(), rng2);
  nets.target2 = Mlp(nets.critic2.dims(), rng2);
  soft_update(nets, 1.0);
  std::vector<float> c, t;
  nets.critic1.append_params(c);
  nets.critic2.append_params(c);
  nets.target1.append_params(t);
  nets.target2.append_params(t);
  REQUIRE(c.size() == t.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == t[i]);
}

// ---------------------------------------------------------------------------
// Replay buffer

TEST_CASE("the ring overwrites oldest records once full") {
  ReplayBuffer buf(4);
  CHECK(buf.capacity() == 4);
  Rng rng = make_rng(110);
  for (int i = 0; i < 10; ++i) {
    Transition t = make_transition(rng);
    t.action = static_cast<double>(i);
    buf.push(t);
    CHECK(buf.size() == std::min<std::size_t>(i + 1, 4));
  }
  std::vector<double> kept;
  for (std::size_t s = 0; s < buf.size(); ++s) kept.push_back(buf[s].action);
  std::sort(kept.begin(), kept.end());
  CHECK(kept == std::vector<double>{6.0, 7.0, 8.0, 9.0});
}

TEST_CASE("sampling is uniform over occupied slots") {
  ReplayBuffer buf(100);
  Rng fill = make_rng(111);
  for (int i = 0; i < 100; ++i) buf.push(make_transition(fill));
  Rng rng = make_rng(112);
  const std::size_t draws = 1'000'000;
  std::vector<int> counts(100, 0);
  for (std::size_t i : buf.sample_indices(draws, rng)) ++counts[i];
  const double expected = static_cast<double>(draws) / 100.0;
  double chi2 = 0.0;
  for (int c : counts) {
    const double d = c - expected;
    chi2 += d * d / expected;
  }
  // 99 degrees of freedom; the 0.001 upper quantile is 148.23.
  CHECK(chi2 < 148.23);
}

TEST_CASE("replay buffer input validation") {
  CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
  ReplayBuffer buf(4);
  Rng rng = make_rng(113);
  CHECK_THROWS_AS(buf.sample_indices(1, rng), std::logic_error);
  CHECK_THROWS_AS(buf.sample(1, rng), std::logic_error);
}

TEST_CASE("sample returns the transitions its indices select") {
  ReplayBuffer buf(16);
  Rng fill = make_rng(114);
  for (int i = 0; i < 16; ++i) {
    Transition t = make_transition(fill);
    t.action = static_cast<double>(i);
    buf.push(t);
  }
  Rng ra = make_rng(115);
  Rng rb = make_rng(115);
  const std::vector<std::size_t> idx = buf.sample_indices(32, ra);
  const std::vector<Transition> batch = buf.sample(32, rb);
  REQUIRE(batch.size() == idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    CHECK(batch[i].action == static_cast<double>(idx[i]));
}

// ---------------------------------------------------------------------------
// Checkpoints

TEST_CASE("checkpoints round-trip every parameter at float precision") {
  Rng rng = make_rng(120);
  SacHyperparams hp;
  hp.hidden_width = 8;
  SacNetworks nets = make_networks(kObservationDim, hp, rng);
  nets.log_alpha = -0.31;

  const std::string path = "tests_sac_ckpt_tmp.bin";
  save_checkpoint(nets, path);
  const SacNetworks back = load_checkpoint(path);

  CHECK(back.actor.dims() == nets.actor.dims());
  CHECK(back.critic1.dims() == nets.critic1.dims());
  const std::vector<float> a = serialized(nets);
  const std::vector<float> b = serialized(back);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK(back.log_alpha ==
        static_cast<double>(static_cast<float>(nets.log_alpha)));

  // Saving the loaded networks reproduces the file byte for byte.
  const std::string path2 = "tests_sac_ckpt_tmp2.bin";
  save_checkpoint(back, path2);
  std::ifstream f1(path, std::ios::binary);
  std::ifstream f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK_FALSE(s1.empty());
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("corrupt checkpoints fail with located errors") {
  const std::string path = "tests_sac_badckpt_tmp.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "XXXXXXXXXXXXXXXXXXXXXXXX";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path),
                       doctest::Contains("bad magic at byte 0"),
                       std::runtime_error);

  Rng rng = make_rng(121);
  SacHyperparams hp;
  hp.hidden_width = 8;
  SacNetworks nets = make_networks(kObservationDim, hp, rng);
  save_checkpoint(nets, path);

  // Truncation mid-payload.
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    bytes.resize(100);
    std::ofstream out(path, std::ios::binary);
    out << bytes;
  }
  try {
    load_checkpoint(path);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("at byte") != std::string::npos);
  }

  // Trailing garbage after a full payload.
  save_checkpoint(nets, path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << 'y';
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("trailing"),
                       std::runtime_error);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/no.ckpt"),
                  std::runtime_error);
  std::remove(path.c_str());
}

// ---------------------------------------------------------------------------
// Hyperparameter validation and the training loop

TEST_CASE("hyperparameter validation rejects out-of-range settings") {
  SacHyperparams hp;
  CHECK_NOTHROW(validate_sac(hp));
  hp.tau = 0.0;
  CHECK_THROWS_AS(validate_sac(hp), std::invalid_argument);
  hp = SacHyperparams{};
  hp.gamma = 1.0;
  CHECK_THROWS_AS(validate_sac(hp), std::invalid_argument);
  hp = SacHyperparams{};
  hp.batch_size = 0;
  CHECK_THROWS_AS(validate_sac(hp), std::invalid_argument);
  hp = SacHyperparams{};
  hp.adam_lr = 0.0;
  CHECK_THROWS_AS(validate_sac(hp), std::invalid_argument);
  hp = SacHyperparams{};
  hp.init_alpha = 0.0;
  CHECK_THROWS_AS(validate_sac(hp), std::invalid_argument);
  hp = SacHyperparams{};
  hp.eval_interval = 0;
  CHECK_THROWS_AS(validate_sac(hp), std::invalid_argument);
  hp = SacHyperparams{};
  hp.hidden_width = 0;
  CHECK_THROWS_AS(validate_sac(hp), std::invalid_argument);
}

namespace {

EnvConfig smoke_env() {
  EnvConfig cfg;
  cfg.episode_duration = 0.5;
  cfg.levels = {0};
  cfg.subject_noise_frac = 0.0;
  return cfg;
}

SacHyperparams smoke_hp() {
  SacHyperparams hp;
  hp.total_steps = 300;
  hp.warmup_steps = 100;
  hp.batch_size = 32;
  hp.buffer_capacity = 10'000;
  hp.eval_interval = 100;
  hp.eval_episodes = 1;
  hp.hidden_width = 8;
  return hp;
}

}  // namespace

TEST_CASE("zero training steps return the untrained networks") {
  SacHyperparams hp = smoke_hp();
  hp.total_steps = 0;
  const TrainResult res = train(smoke_env(), hp, 17);
  CHECK(res.curve.empty());
  CHECK(res.steps_run == 0);
  CHECK_FALSE(res.interrupted);
  CHECK(res.best_step == 0);
  const std::vector<float> best = serialized(res.best);
  const std::vector<float> fin = serialized(res.final_nets);
  REQUIRE(best.size() == fin.size());
  for (std::size_t i = 0; i < best.size(); ++i) CHECK(best[i] == fin[i]);
  CHECK(res.final_nets.log_alpha == doctest::Approx(std::log(0.2))
                                        .epsilon(1e-12));
}

TEST_CASE("short training runs are reproducible point for point") {
  const TrainResult a = train(smoke_env(), smoke_hp(), 17);
  const TrainResult b = train(smoke_env(), smoke_hp(), 17);
  CHECK(a.steps_run == 300);
  CHECK_FALSE(a.interrupted);
  REQUIRE(a.curve.size() == 3);
  REQUIRE(b.curve.size() == 3);
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].step == b.curve[i].step);
    CHECK(a.curve[i].eval_return_mean == b.curve[i].eval_return_mean);
    CHECK(a.curve[i].eval_return_std == b.curve[i].eval_return_std);
    CHECK(a.curve[i].alpha == b.curve[i].alpha);
    CHECK(a.curve[i].critic_loss == b.curve[i].critic_loss);
  }
  const std::vector<float> pa = serialized(a.final_nets);
  const std::vector<float> pb = serialized(b.final_nets);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);

  CHECK(a.best_step >= 100);
  CHECK(a.best_step <= 300);
  double best_seen = -1e300;
  for (const CurvePoint& pt : a.curve)
    best_seen = std::max(best_seen, pt.eval_return_mean);
  CHECK(a.best_return == best_seen);
}

TEST_CASE("a stop request interrupts training early") {
  int calls = 0;
  const TrainResult res = train(smoke_env(), smoke_hp(), 17,
                                [&calls] { return ++calls > 50; });
  CHECK(res.interrupted);
  CHECK(res.steps_run < 300);
  CHECK(res.steps_run >= 49);
}

TEST_CASE("curve files carry the fixed header and one row per point") {
  std::vector<CurvePoint> curve(2);
  curve[0] = {100, -1200.5, 3.25, 0.2, 0.75};
  curve[1] = {200, -1100.0, 1.5, 0.19, 0.5};
  const std::string path = "tests_sac_curve_tmp.csv";
  write_curve_csv(curve, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,eval_return_mean,eval_return_std,alpha,critic_loss");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  std::remove(path.c_str());
}
