#include "exotwin/environment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace exotwin {

void validate_env(const EnvConfig& c) {
  if (!(c.control_dt > 0.0 && c.physics_dt > 0.0))
    throw std::invalid_argument("env: timesteps must be > 0");
  const double ratio = c.control_dt / c.physics_dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw std::invalid_argument(
        "env: control_dt must be an integer multiple of physics_dt");
  if (!(c.episode_duration > 0.0))
    throw std::invalid_argument("env: episode_duration must be > 0");
  if (c.levels.empty())
    throw std::invalid_argument("env: levels must be non-empty");
  for (int lvl : c.levels) SpasticityLevel{lvl};
  if (c.target_angle_deg < c.coupling.exo_theta_min_deg ||
      c.target_angle_deg > c.coupling.exo_theta_max_deg)
    throw std::invalid_argument("env: target outside the exo joint range");
  if (!(c.subject_noise_frac >= 0.0))
    throw std::invalid_argument("env: subject_noise_frac must be >= 0");
  validate_body(c.body);
  validate_coupling(c.coupling);
  validate_reward(c.reward);
  for (int i = 0; i < SpasticityLevel::kCount; ++i) {
    const SubjectParams& row = c.level_table[static_cast<std::size_t>(i)];
    if (row.level.id() != i)
      throw std::invalid_argument("env: level_table entry " +
                                  std::to_string(i) + " has wrong level");
    validate_subject(row);
  }
  for (const MuscleParams& m : c.muscles) validate_muscle(m);
}

double EpisodeTrace::total_reward() const {
  return std::accumulate(reward.begin(), reward.end(), 0.0);
}

void write_trace_csv(const EpisodeTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file: " + path);
  out << "t,theta_deg,omega,action,tau_interaction,reward,level,seed\n";
  char buf[512];
  for (std::size_t i = 0; i < trace.time.size(); ++i) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%llu\n",
                  trace.time[i], rad_to_deg(trace.theta[i]), trace.omega[i],
                  trace.action[i], trace.tau_int[i], trace.reward[i],
                  trace.level,
                  static_cast<unsigned long long>(trace.seed));
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing trace file: " + path);
}

Environment::Environment(EnvConfig cfg)
    : cfg_(std::move(cfg)),
      muscles_(cfg_.muscles),
      rng_(make_rng(cfg_.seed)) {
  validate_env(cfg_);
  group_map_.validate();
  substeps_ = static_cast<int>(std::round(cfg_.control_dt / cfg_.physics_dt));
  steps_per_episode_ =
      static_cast<int>(std::round(cfg_.episode_duration / cfg_.control_dt));
  target_ = deg_to_rad(cfg_.target_angle_deg);
}

Observation Environment::reset(std::optional<int> level_override,
                               std::optional<std::uint64_t> seed) {
  if (seed) rng_ = make_rng(*seed);
  int level;
  if (level_override) {
    level = *level_override;
    SpasticityLevel{level};  // validates
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, cfg_.levels.size() - 1);
    level = cfg_.levels[pick(rng_)];
  }
  subject_ = sample_subject(cfg_.level_table[static_cast<std::size_t>(level)],
                            rng_, cfg_.subject_noise_frac);

  ms_ = MsState{};
  ms_.theta = deg_to_rad(cfg_.start_angle_deg);
  ms_.omega = 0.0;
  ms_.muscle_activations =
      spastic_activations(rad_to_deg(ms_.theta), 0.0, 0.0, subject_,
                          group_map_);
  exo_ = ExoState{};
  exo_.theta_exo = ms_.theta;  // strap unloaded at reset

  step_count_ = 0;
  done_ = false;
  prev_action_ = 0.0;
  prev_omega_ = 0.0;
  prev_tau_int_ = measure_interaction(nullptr);
  return observation();
}

double Environment::measure_interaction(StepInfo* info) const {
  const double strap_flex = strap_torque(exo_, ms_.theta, ms_.omega,
                                         cfg_.coupling);
  const double mis_flex =
      (cfg_.coupling.slider_stiffness * exo_.slider_pos +
       cfg_.coupling.slider_damping * exo_.slider_vel) *
      cfg_.coupling.misalignment_lever;
  const double spastic_ext = spastic_knee_torque(ms_, muscles_);
  const double tau =
      interaction_torque(-strap_flex, -mis_flex, spastic_ext);
  if (info != nullptr) {
    info->strap_torque = strap_flex;
    info->misalignment_torque = mis_flex;
    info->spastic_torque = spastic_ext;
    info->interaction_torque = tau;
  }
  return tau;
}

Environment::StepResult Environment::step(ActuatorCommand cmd) {
  if (done_)
    throw std::logic_error("environment: step() after episode end");

  const double dt = cfg_.physics_dt;
  try {
    for (int i = 0; i < substeps_; ++i) {
      const double strap_flex = strap_torque(exo_, ms_.theta, ms_.omega,
                                             cfg_.coupling);
      const double mis_flex = slider_step(exo_, strap_flex, dt, cfg_.coupling);
      const double coupling_flex = strap_flex + mis_flex;
      ms_step(ms_, coupling_flex, subject_, cfg_.body, muscles_, dt,
              group_map_);
      exo_step(exo_, cmd, coupling_flex, dt, cfg_.coupling);
    }
  } catch (const std::runtime_error& e) {
    done_ = true;
    throw std::runtime_error("episode aborted at t=" +
                             std::to_string(time()) + " s, level " +
                             std::to_string(subject_.level.id()) + ": " +
                             e.what());
  }
  ++step_count_;

  StepResult result;
  result.info.time = time();
  result.info.level = subject_.level.id();
  const double tau_int = measure_interaction(&result.info);

  StepSnapshot snap;
  snap.pose_error = std::abs(ms_.theta - target_);
  snap.knee_vel = ms_.omega;
  snap.interaction_torque = tau_int;
  snap.prev_interaction_torque = prev_tau_int_;
  snap.action = cmd.u;
  snap.prev_action = prev_action_;
  snap.prev_knee_vel = prev_omega_;
  result.reward = total_reward(snap, cfg_.reward);

  prev_action_ = cmd.u;
  prev_tau_int_ = tau_int;
  prev_omega_ = ms_.omega;
  done_ = step_count_ >= steps_per_episode_;
  result.done = done_;
  result.obs = observation();
  return result;
}

Observation Environment::observation() const {
  Observation obs{};
  obs[0] = ms_.theta;
  obs[1] = ms_.omega;
  obs[2] = exo_.theta_exo;
  obs[3] = exo_.omega_exo;
  obs[4] = exo_.slider_pos;
  obs[5] = exo_.slider_vel;
  obs[6] = exo_.theta_exo - ms_.theta;
  obs[7] = exo_.omega_exo - ms_.omega;
  for (int m = 0; m < kMuscleCount; ++m) {
    const MuscleParams& mp = muscles_[static_cast<std::size_t>(m)];
    const double l = fiber_length_norm(ms_.theta, mp);
    const double v = fiber_velocity_norm(ms_.omega, mp);
    const double a = ms_.muscle_activations[static_cast<std::size_t>(m)];
    obs[8 + m] = a;
    obs[19 + m] = hill_force(a, l, v, mp) / mp.f_max;
  }
  obs[30] = prev_action_;
  obs[31] = ms_.theta - target_;
  obs[32] = target_;
  obs[33] = prev_tau_int_ / kActuatorMaxTorque;
  for (double x : obs)
    if (!std::isfinite(x))
      throw std::runtime_error("environment: non-finite observation");
  return obs;
}

double Environment::time() const {
  return step_count_ * cfg_.control_dt;
}

EpisodeTrace run_episode(const Controller& controller, const EnvConfig& cfg,
                         int level, std::uint64_t seed) {
  Environment env(cfg);
  Observation obs = env.reset(level, seed);

  EpisodeTrace trace;
  trace.level = level;
  trace.seed = seed;
  const int n = env.steps_per_episode();
  trace.time.reserve(n);
  trace.theta.reserve(n);
  trace.omega.reserve(n);
  trace.action.reserve(n);
  trace.tau_int.reserve(n);
  trace.reward.reserve(n);

  bool done = false;
  while (!done) {
    const double u = controller(obs);
    auto result = env.step(ActuatorCommand{u});
    trace.time.push_back(result.info.time);
    trace.theta.push_back(env.ms_state().theta);
    trace.omega.push_back(env.ms_state().omega);
    trace.action.push_back(ActuatorCommand{u}.u);
    trace.tau_int.push_back(result.info.interaction_torque);
    trace.reward.push_back(result.reward);
    obs = result.obs;
    done = result.done;
  }
  return trace;
}

}  // namespace exotwin
