#pragma once

// From-scratch Soft Actor-Critic for the one-dimensional actuator command:
// squashed-Gaussian actor, twin critics with soft-updated targets, an
// auto-tuned entropy temperature kept in log space, and a single-threaded
// training loop interleaving one gradient update per environment step.

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "exotwin/environment.hpp"
#include "exotwin/mlp.hpp"
#include "exotwin/replay_buffer.hpp"

namespace exotwin {

struct SacHyperparams {
  std::size_t buffer_capacity = 5'000'000;
  std::int64_t total_steps = 200'000;  // desk-scale default
  std::int64_t warmup_steps = 10'000;  // uniform random actions
  int batch_size = 4096;
  double gamma = 0.99;
  double tau = 0.05;
  double adam_lr = 1e-4;
  double init_alpha = 0.2;
  double target_entropy = -1.0;  // minus the action dimension
  std::int64_t eval_interval = 10'000;
  int eval_episodes = 4;
  int hidden_width = 64;
};

void validate_sac(const SacHyperparams& hp);

/// Actor maps the observation to (mean, log_std); critics map
/// observation + action to a scalar value.
struct SacNetworks {
  Mlp actor;
  Mlp critic1, critic2;
  Mlp target1, target2;
  double log_alpha = 0.0;

  double alpha() const;
};

SacNetworks make_networks(int obs_dim, const SacHyperparams& hp, Rng& rng);

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;

struct ActionSample {
  double action = 0.0;    // tanh-squashed, in (-1, 1)
  double log_prob = 0.0;  // includes the tanh change-of-variables term
  double mean = 0.0;      // pre-squash Gaussian mean
  double log_std = 0.0;   // after clamping to [kLogStdMin, kLogStdMax]
  double noise = 0.0;     // the standard-normal draw used
};

/// Stable squashed-Gaussian log density of pre-tanh value z under
/// N(mean, exp(log_std)^2): the tanh correction is evaluated as
/// 2 (log 2 - z - softplus(-2 z)).
double squashed_log_prob(double z, double mean, double log_std);

ActionSample sample_action(const Mlp& actor, const Observation& obs, Rng& rng);
double deterministic_action(const Mlp& actor, const Observation& obs);

/// y_i = r_i + gamma (1 - done_i) (min(Q1', Q2')(s', a') - alpha log pi(a'|s'))
/// with a' drawn via noise[i]. Pure in all arguments; permuting batch and
/// noise together permutes the result identically.
Vector compute_critic_targets(const SacNetworks& nets,
                              const std::vector<Transition>& batch,
                              const std::vector<double>& noise,
                              const SacHyperparams& hp);

/// Adam moments for every trained tensor plus the temperature scalar.
struct SacOptimizers {
  AdamState actor, critic1, critic2;
  double alpha_m = 0.0, alpha_v = 0.0;
  std::int64_t alpha_t = 0;
};

SacOptimizers make_optimizers(const SacNetworks& nets);

struct UpdateDiagnostics {
  double critic_loss = 0.0;  // mean of the two critics' MSE
  double actor_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;  // -mean log pi
};

/// One gradient step on critics, actor and temperature, followed by the soft
/// target update. Noise draw order: the target (next-state) batch first,
/// then the actor (current-state) batch.
UpdateDiagnostics sac_update(SacNetworks& nets, SacOptimizers& opt,
                             const std::vector<Transition>& batch, Rng& rng,
                             const SacHyperparams& hp);

/// target <- tau * online + (1 - tau) * target on both target critics.
void soft_update(SacNetworks& nets, double tau);

struct CurvePoint {
  std::int64_t step = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double alpha = 0.0;
  double critic_loss = 0.0;  // mean since the previous evaluation
};

void write_curve_csv(const std::vector<CurvePoint>& curve,
                     const std::string& path);

struct TrainResult {
  SacNetworks best;
  SacNetworks final_nets;
  std::vector<CurvePoint> curve;
  std::int64_t best_step = 0;
  double best_return = 0.0;
  std::int64_t steps_run = 0;
  bool interrupted = false;
};

/// Runs hp.total_steps environment steps with one update per step after the
/// warmup; evaluates the deterministic policy on a fixed seed set every
/// eval_interval steps and keeps the best-scoring parameters. Fully
/// deterministic in (env_cfg, hp, seed). `should_stop`, when provided, is
/// polled once per environment step; a true return stops training early and
/// marks the result interrupted.
TrainResult train(const EnvConfig& env_cfg, const SacHyperparams& hp,
                  std::uint64_t seed,
                  const std::function<bool()>& should_stop = {},
                  std::ostream* log = nullptr);

/// Checkpoint layout, little-endian: "SPXCKPT" | u32 format version |
/// u32 observation-layout version | u32 network count (5) | per network a
/// u32 dim count and the dims | all parameters as f32 in network order
/// (actor, critic1, critic2, target1, target2; per layer row-major weights
/// then bias) | f32 log_alpha.
constexpr char kCheckpointMagic[8] = "SPXCKPT";  // 7 chars + NUL
constexpr std::uint32_t kCheckpointFormatVersion = 1;

void save_checkpoint(const SacNetworks& nets, const std::string& path);
/// Throws std::runtime_error naming the byte offset of the first
/// inconsistency (bad magic, version mismatch, truncation).
SacNetworks load_checkpoint(const std::string& path);

}  // namespace exotwin
