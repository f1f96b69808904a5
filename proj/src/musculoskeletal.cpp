#include "exotwin/musculoskeletal.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace exotwin {

namespace {

// Force-velocity curvature (Hill a/F0) and the eccentric plateau.
constexpr double kFvCurvature = 0.25;
constexpr double kFvEccentricMax = 1.4;
// Eccentric rise rate chosen so the slope is continuous at v = 0.
constexpr double kFvEccentricRate =
    (1.0 + 1.0 / kFvCurvature) / (kFvEccentricMax - 1.0);
// Passive curve reaches 1.0 at l = 1.6.
constexpr double kFpExponent = 5.0;

}  // namespace

void validate_muscle(const MuscleParams& m) {
  if (!(m.f_max > 0.0))
    throw std::invalid_argument(std::string(muscle_name(m.id)) +
                                ": f_max must be > 0");
  if (!(m.optimal_fiber_length > 0.0))
    throw std::invalid_argument(std::string(muscle_name(m.id)) +
                                ": optimal_fiber_length must be > 0");
  if (!(m.fl_width > 0.0) || m.fl_width > 1.0)
    throw std::invalid_argument(std::string(muscle_name(m.id)) +
                                ": fl_width must be in (0,1]");
  if (!(m.fv_max_shortening_velocity > 0.0))
    throw std::invalid_argument(std::string(muscle_name(m.id)) +
                                ": fv_max_shortening_velocity must be > 0");
}

void validate_body(const BodyParams& b) {
  if (!(b.shank_mass > 0.0 && b.com_distance > 0.0 &&
        b.inertia_about_knee > 0.0 && b.viscous_damping > 0.0))
    throw std::invalid_argument("body: mass, com, inertia, damping must be > 0");
  if (b.joint_stop_stiffness < 0.0 || b.joint_stop_damping < 0.0)
    throw std::invalid_argument("body: joint stop coefficients must be >= 0");
  if (!(b.theta_min_deg < b.theta_max_deg))
    throw std::invalid_argument("body: theta_min must be < theta_max");
}

MuscleSet default_muscles() {
  // Flexors: reference angle at 95 deg so fibers are at/below optimal length
  // through the working range (no parasitic passive tension at the start
  // posture). Extensors mirrored at 0 deg.
  auto flexor = [](MuscleId id, double f_max) {
    MuscleParams m;
    m.id = id;
    m.f_max = f_max;
    m.moment_arm = -0.02;
    m.optimal_fiber_length = 0.13;
    m.ref_angle_deg = 95.0;
    return m;
  };
  auto extensor = [](MuscleId id, double f_max) {
    MuscleParams m;
    m.id = id;
    m.f_max = f_max;
    m.moment_arm = 0.03;
    m.optimal_fiber_length = 0.15;
    m.ref_angle_deg = 0.0;
    return m;
  };
  return MuscleSet{
      flexor(MuscleId::kGastrocLat, 360.0),
      flexor(MuscleId::kGastrocMed, 660.0),
      flexor(MuscleId::kSemimem, 840.0),
      flexor(MuscleId::kSemiten, 660.0),
      flexor(MuscleId::kBicFemLong, 540.0),
      flexor(MuscleId::kBicFemShort, 480.0),
      extensor(MuscleId::kGracilis, 150.0),
      extensor(MuscleId::kVastusMed, 900.0),
      extensor(MuscleId::kVastusLat, 900.0),
      extensor(MuscleId::kVastusInt, 900.0),
      extensor(MuscleId::kRectusFem, 720.0),
  };
}

double fiber_length_norm(double theta, const MuscleParams& m) {
  const double ref = deg_to_rad(m.ref_angle_deg);
  return 1.0 - m.moment_arm * (theta - ref) / m.optimal_fiber_length;
}

double fiber_velocity_norm(double omega, const MuscleParams& m) {
  return -m.moment_arm * omega / m.optimal_fiber_length;
}

double hill_fl(double l_norm, const MuscleParams& m) {
  const double d = (l_norm - 1.0) / m.fl_width;
  return std::exp(-d * d);
}

double hill_fv(double v_norm, const MuscleParams& m) {
  const double s = -v_norm / m.fv_max_shortening_velocity;  // shortening > 0
  if (s >= 0.0) {
    if (s >= 1.0) return 0.0;
    return (1.0 - s) / (1.0 + s / kFvCurvature);
  }
  const double e = -s;  // lengthening fraction
  return kFvEccentricMax -
         (kFvEccentricMax - 1.0) / (1.0 + kFvEccentricRate * e);
}

double hill_fp(double l_norm) {
  if (l_norm <= 1.0) return 0.0;
  return (std::exp(kFpExponent * (l_norm - 1.0)) - 1.0) /
         (std::exp(kFpExponent * 0.6) - 1.0);
}

double hill_force(double activation, double l_norm, double v_norm,
                  const MuscleParams& m) {
  const double active = activation * hill_fl(l_norm, m) * hill_fv(v_norm, m);
  const double force = m.f_max * (active + hill_fp(l_norm));
  return force > 0.0 ? force : 0.0;
}

double spastic_knee_torque(const MsState& state, const MuscleSet& muscles) {
  double torque = 0.0;
  for (int i = 0; i < kMuscleCount; ++i) {
    const MuscleParams& m = muscles[i];
    const double l = fiber_length_norm(state.theta, m);
    const double v = fiber_velocity_norm(state.omega, m);
    torque += m.moment_arm * hill_force(state.muscle_activations[i], l, v, m);
  }
  return torque;
}

double gravity_torque(double theta, const BodyParams& b) {
  return -b.shank_mass * kGravity * b.com_distance * std::cos(theta);
}

double joint_stop_torque(double theta, double omega, const BodyParams& b) {
  if (b.joint_stop_stiffness <= 0.0) return 0.0;
  const double lo = deg_to_rad(b.theta_min_deg);
  const double hi = deg_to_rad(b.theta_max_deg);
  if (theta > hi)
    return -b.joint_stop_stiffness * (theta - hi) - b.joint_stop_damping * omega;
  if (theta < lo)
    return b.joint_stop_stiffness * (lo - theta) - b.joint_stop_damping * omega;
  return 0.0;
}

void ms_step(MsState& state, double external_torque_flex,
             const SubjectParams& subject, const BodyParams& body,
             const MuscleSet& muscles, double dt, const MuscleGroupMap& map) {
  if (!(dt > 0.0) || dt > 0.005)
    throw std::invalid_argument("ms_step: dt must be in (0, 0.005]");

  const double omega_sign =
      (state.omega > 0.0) ? 1.0 : (state.omega < 0.0 ? -1.0 : 0.0);
  state.muscle_activations = spastic_activations(
      rad_to_deg(state.theta), state.omega, omega_sign, subject, map);

  // Muscle and gravity torques are extension-positive; flip once into the
  // flexion frame of theta.
  const double tau_ext =
      spastic_knee_torque(state, muscles) + gravity_torque(state.theta, body);
  const double tau_flex = -tau_ext + joint_stop_torque(state.theta, state.omega, body) -
                          body.viscous_damping * state.omega +
                          external_torque_flex;

  state.omega += dt * tau_flex / body.inertia_about_knee;
  state.theta += dt * state.omega;

  if (body.joint_stop_stiffness > 0.0) {
    const double lo = deg_to_rad(body.theta_min_deg);
    const double hi = deg_to_rad(body.theta_max_deg);
    if (state.theta > hi) {
      state.theta = hi;
      if (state.omega > 0.0) state.omega = 0.0;
    } else if (state.theta < lo) {
      state.theta = lo;
      if (state.omega < 0.0) state.omega = 0.0;
    }
  }

  if (!std::isfinite(state.theta) || !std::isfinite(state.omega)) {
    throw std::runtime_error("ms_step: non-finite knee state");
  }
}

}  // namespace exotwin
