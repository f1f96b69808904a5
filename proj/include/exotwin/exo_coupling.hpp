#pragma once

// Exoskeleton lower link, torque actuator with saturation, and the compliant
// attachment that transmits torque to the human knee.
//
// The physical mechanism (two pinned cuffs plus a prismatic slider on the
// thigh) is reduced to three coupled elements:
//   * a single exo rotational DOF with the same flexion-positive angle
//     convention as the knee,
//   * a rotational strap spring-damper between exo and knee angles,
//     aggregating both +-15 deg pin joints, with a stiff stop beyond the
//     pin range,
//   * a prismatic slider state whose spring force, acting through the
//     misalignment lever, adds a bounded parasitic torque on the knee.
//
// Strap and misalignment torques are flexion-positive on the human; the
// exact negatives act on the exo link every step (Newton's third law by
// construction). A positive actuator command drives extension.

#include <algorithm>

#include "exotwin/musculoskeletal.hpp"

namespace exotwin {

constexpr double kActuatorMaxTorque = 100.0;  // N m

/// Exo link + attachment state.
struct ExoState {
  double theta_exo = deg_to_rad(90.0);  // rad, flexion positive
  double omega_exo = 0.0;               // rad/s
  double slider_pos = 0.0;              // m
  double slider_vel = 0.0;              // m/s
};

struct CouplingParams {
  double strap_stiffness = 60.0;    // N m / rad
  double strap_damping = 1.5;       // N m s / rad
  double pin_range_deg = 15.0;      // strap deflection before the stop
  double pin_stop_stiffness = 1000.0;  // N m / rad
  double slider_range = 0.02;       // m, hard stops at +- this value
  double slider_stiffness = 20000.0; // N / m
  double slider_damping = 50.0;     // N s / m
  double slider_retention = 0.97;   // per-step velocity retention (friction)
  double misalignment_lever = 0.05; // m
  double exo_link_mass = 1.5;       // kg
  double exo_com_distance = 0.2;    // m
  double exo_link_inertia = 0.06;   // kg m^2
  double exo_theta_min_deg = -15.0;
  double exo_theta_max_deg = 95.0;
};

void validate_coupling(const CouplingParams& p);

/// Normalized actuator command; clamped to [-1, 1] on construction.
struct ActuatorCommand {
  explicit ActuatorCommand(double value = 0.0)
      : u(std::clamp(value, -1.0, 1.0)) {}
  double u;
};

/// Motor torque for a command: kActuatorMaxTorque * u (extension-positive).
double actuator_torque(ActuatorCommand cmd);

/// Strap torque on the human knee (flexion-positive): spring-damper on the
/// relative angle delta = theta_exo - ms_theta, plus a stiff stop term once
/// |delta| exceeds the pin range. The exo link receives the exact negative.
double strap_torque(const ExoState& exo, double ms_theta, double ms_omega,
                    const CouplingParams& p);

/// Advances the slider under the load implied by the current strap torque
/// and returns the misalignment torque on the human knee (flexion-positive).
/// The slider is driven by strap_torque / misalignment_lever, restored by
/// its spring-damper, loses a (1 - retention) fraction of velocity per step,
/// and is hard-stopped at +-slider_range.
double slider_step(ExoState& exo, double strap_torque_flex, double dt,
                   const CouplingParams& p);

/// One semi-implicit Euler substep of the exo link. reaction_torque_flex is
/// the total coupling torque applied to the human this substep (strap +
/// misalignment, flexion-positive); its negative acts here. Joint stops at
/// [exo_theta_min, exo_theta_max] mirror the knee implementation. Throws on
/// non-finite state.
void exo_step(ExoState& exo, ActuatorCommand cmd, double reaction_torque_flex,
              double dt, const CouplingParams& p);

/// Net torque applied to the human knee joint: strap + misalignment +
/// spastic reflex contributions, all in the flexion frame. This is the
/// interaction torque penalized by the reward and reported by the metrics.
double interaction_torque(double strap, double misalignment, double spastic);

}  // namespace exotwin
