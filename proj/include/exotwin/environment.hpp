#pragma once

// Episode orchestration: composes the knee plant, the exo coupling, the
// reflex model and the reward into a step/reset interface for controllers.
//
// Each control step holds the actuator command for control_dt/physics_dt
// physics substeps. Within a substep the strap and misalignment torques are
// evaluated once from the pre-step states and then applied to the knee and,
// negated, to the exo link, so the coupling satisfies Newton's third law
// exactly. The interaction torque reported to reward and metrics is
// extension-positive: strap + misalignment (frame-flipped) + spastic.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "exotwin/exo_coupling.hpp"
#include "exotwin/reward.hpp"

namespace exotwin {

constexpr int kObservationDim = 34;

/// Bumped whenever the meaning or order of observation entries changes;
/// stored in checkpoints so stale policies are rejected on load.
constexpr std::uint32_t kObservationLayoutVersion = 1;

/// Fixed observation layout:
///   [0]  knee angle (rad)            [1]  knee velocity (rad/s)
///   [2]  exo angle (rad)             [3]  exo velocity (rad/s)
///   [4]  slider position (m)         [5]  slider velocity (m/s)
///   [6]  strap relative angle (rad)  [7]  strap relative velocity (rad/s)
///   [8..18]  muscle activations in MuscleId order
///   [19..29] muscle forces / f_max in MuscleId order
///   [30] previous action             [31] signed pose error (rad)
///   [32] target angle (rad)          [33] interaction torque / 100 N m
using Observation = std::array<double, kObservationDim>;

struct EnvConfig {
  double start_angle_deg = 90.0;
  double target_angle_deg = 7.0;  // 90 deg minus the 83 deg extension
  double episode_duration = 8.0;  // s
  double control_dt = 0.01;       // s
  double physics_dt = 0.001;      // s
  std::vector<int> levels = {0, 1, 2, 3};  // reset() samples uniformly
  std::uint64_t seed = 0;
  double subject_noise_frac = 0.10;
  BodyParams body;
  CouplingParams coupling;
  RewardConfig reward;
  std::array<SubjectParams, SpasticityLevel::kCount> level_table =
      default_level_table();
  MuscleSet muscles = default_muscles();
};

void validate_env(const EnvConfig& c);

struct StepInfo {
  double time = 0.0;               // s, end of this control step
  double interaction_torque = 0.0; // N m, extension-positive
  double strap_torque = 0.0;       // N m, flexion-positive on the knee
  double misalignment_torque = 0.0;// N m, flexion-positive on the knee
  double spastic_torque = 0.0;     // N m, extension-positive
  int level = 0;
};

struct Transition {
  Observation obs{};
  double action = 0.0;
  double reward = 0.0;
  Observation next_obs{};
  bool done = false;
};

/// One control-rate sample per step (no sample for the reset state).
struct EpisodeTrace {
  int level = 0;
  std::uint64_t seed = 0;
  std::vector<double> time;       // s
  std::vector<double> theta;      // rad
  std::vector<double> omega;      // rad/s
  std::vector<double> action;     // [-1, 1]
  std::vector<double> tau_int;    // N m, extension-positive
  std::vector<double> reward;

  double total_reward() const;
};

/// Writes the trace as CSV: t,theta_deg,omega,action,tau_interaction,reward,
/// level,seed. Values are serialized with 17 significant digits so a re-read
/// reproduces them bit-exactly.
void write_trace_csv(const EpisodeTrace& trace, const std::string& path);

class Environment {
 public:
  explicit Environment(EnvConfig cfg = EnvConfig{});

  /// Samples a severity level (uniform over cfg.levels unless overridden)
  /// and a subject, then places knee and exo at the start angle with zero
  /// velocities and an unloaded strap/slider. A seed reseeds the
  /// environment's stream; without one the existing stream continues.
  Observation reset(std::optional<int> level_override = std::nullopt,
                    std::optional<std::uint64_t> seed = std::nullopt);

  struct StepResult {
    Observation obs{};
    double reward = 0.0;
    bool done = false;
    StepInfo info{};
  };

  /// Advances one control step. Throws std::logic_error if called after the
  /// episode finished and std::runtime_error (with episode context) if the
  /// state stops being finite.
  StepResult step(ActuatorCommand cmd);

  Observation observation() const;
  const SubjectParams& subject() const { return subject_; }
  const EnvConfig& config() const { return cfg_; }
  const MsState& ms_state() const { return ms_; }
  const ExoState& exo_state() const { return exo_; }
  double time() const;
  bool done() const { return done_; }
  int steps_per_episode() const { return steps_per_episode_; }
  double target_angle() const { return target_; }

 private:
  double measure_interaction(StepInfo* info) const;

  EnvConfig cfg_;
  MuscleSet muscles_;
  MuscleGroupMap group_map_{};
  Rng rng_;
  SubjectParams subject_;
  MsState ms_;
  ExoState exo_;
  double target_ = 0.0;
  int substeps_ = 10;
  int steps_per_episode_ = 800;
  int step_count_ = 0;
  bool done_ = true;
  double prev_action_ = 0.0;
  double prev_tau_int_ = 0.0;
  double prev_omega_ = 0.0;
};

using Controller = std::function<double(const Observation&)>;

/// Runs one full episode with a fresh subject. Deterministic in
/// (controller, level, seed); the trace holds one sample per control step.
EpisodeTrace run_episode(const Controller& controller, const EnvConfig& cfg,
                         int level, std::uint64_t seed);

}  // namespace exotwin
