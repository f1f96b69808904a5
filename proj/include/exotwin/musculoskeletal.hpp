#pragma once

// Reduced knee model: the shank swings as a rigid pendulum about a fixed
// thigh while 11 rigid-tendon Hill-type muscles inject spastic torque.
//
// Conventions used throughout the project:
//   * theta is the knee flexion angle in radians. theta = pi/2 with the
//     shank hanging vertically (start posture), theta -> 0 at full
//     extension. Table-style degree thresholds map linearly.
//   * omega = dtheta/dt; extension means omega < 0.
//   * Torque-valued quantities returned by gravity_torque and
//     spastic_knee_torque are extension-positive (a positive value drives
//     the knee toward extension), matching the signed moment arms. The
//     integrator flips them once into the flexion frame of theta.
//
// With those two conventions the hanging posture at 90 degrees is the
// stable equilibrium and a positive actuator command extends the knee.

#include <array>

#include "exotwin/spasticity.hpp"

namespace exotwin {

constexpr double kGravity = 9.81;  // m/s^2

inline double deg_to_rad(double d) { return d * (3.14159265358979323846 / 180.0); }
inline double rad_to_deg(double r) { return r * (180.0 / 3.14159265358979323846); }

/// Rigid-tendon muscle with a constant signed moment arm (+ extends knee).
struct MuscleParams {
  MuscleId id = MuscleId::kGastrocLat;
  double f_max = 0.0;                       // N
  double moment_arm = 0.0;                  // m, flexors < 0, extensors > 0
  double optimal_fiber_length = 0.1;        // m
  double ref_angle_deg = 0.0;               // angle of optimal fiber length
  double fl_width = 0.45;                   // Gaussian force-length width
  double fv_max_shortening_velocity = 10.0; // optimal lengths / s
};

void validate_muscle(const MuscleParams& m);

using MuscleSet = std::array<MuscleParams, kMuscleCount>;

/// Defaults for the 11 reflex muscles, sized for a paretic limb (reduced
/// strength relative to healthy values); overridable through the config file.
MuscleSet default_muscles();

/// Shank segment plus joint hardware defaults for a 1.75 m / 70 kg adult.
struct BodyParams {
  double shank_mass = 4.0;             // kg, shank + foot
  double com_distance = 0.25;          // m, knee to segment COM
  double inertia_about_knee = 0.35;    // kg m^2
  double viscous_damping = 5.0;        // N m s / rad, strapped-leg effective
  double joint_stop_stiffness = 3000.0;  // N m / rad; 0 disables the stops
  double joint_stop_damping = 50.0;      // N m s / rad
  double theta_min_deg = -45.0;
  double theta_max_deg = 95.0;
};

void validate_body(const BodyParams& b);

/// Continuous state of the human knee.
struct MsState {
  double theta = deg_to_rad(90.0);  // rad, flexion positive
  double omega = 0.0;               // rad/s
  std::array<double, kMuscleCount> muscle_activations{};
};

/// Normalized fiber length under the constant-moment-arm mapping:
/// 1 - moment_arm * (theta - ref_angle) / optimal_fiber_length.
double fiber_length_norm(double theta, const MuscleParams& m);

/// Normalized fiber lengthening rate, d(fiber_length_norm)/dt.
double fiber_velocity_norm(double omega, const MuscleParams& m);

/// Hill-type force: f_max * (a * fl(l) * fv(v) + fp(l)), never negative.
/// fl is a Gaussian about l = 1; fv the classic hyperbola (0 at maximum
/// shortening, 1 at rest, plateau 1.4 eccentric); fp an exponential passive
/// term that is exactly zero for l <= 1. v_norm is the lengthening rate in
/// optimal lengths per second.
double hill_force(double activation, double l_norm, double v_norm,
                  const MuscleParams& m);

/// Active force-length / force-velocity / passive curves, exposed for tests.
double hill_fl(double l_norm, const MuscleParams& m);
double hill_fv(double v_norm, const MuscleParams& m);
double hill_fp(double l_norm);

/// Net muscle torque about the knee, extension-positive: sum of
/// moment_arm_i * hill_force_i over the 11 muscles.
double spastic_knee_torque(const MsState& state, const MuscleSet& muscles);

/// Gravity torque on the shank, extension-positive:
/// -m g c cos(theta). Zero with the shank hanging at 90 deg, maximal
/// opposition to extension with the shank horizontal.
double gravity_torque(double theta, const BodyParams& b);

/// One semi-implicit Euler substep of the knee.
///
/// external_torque_flex is the coupling torque on the knee in the flexion
/// frame (strap + misalignment). Muscle activations are refreshed from the
/// reflex model before the force evaluation. Joint stops act as a stiff
/// spring-damper beyond [theta_min, theta_max] and the angle is projected
/// back into range afterwards (outward velocity zeroed); a stop stiffness of
/// zero disables both mechanisms. Throws on non-finite state.
void ms_step(MsState& state, double external_torque_flex,
             const SubjectParams& subject, const BodyParams& body,
             const MuscleSet& muscles, double dt,
             const MuscleGroupMap& map = MuscleGroupMap{});

/// Spring-damper stop torque in the flexion frame; zero inside the range.
double joint_stop_torque(double theta, double omega, const BodyParams& b);

}  // namespace exotwin
