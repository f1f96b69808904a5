#include "exotwin/exo_coupling.hpp"

#include <cmath>
#include <stdexcept>

namespace exotwin {

namespace {

// Reference mass giving the slider overdamped second-order dynamics at the
// default spring-damper values (CouplingParams carries no mass field).
constexpr double kSliderMass = 0.05;  // kg

// Exo joint hard-range stops, same construction as the knee joint stops.
constexpr double kExoStopStiffness = 3000.0;  // N m / rad
constexpr double kExoStopDamping = 50.0;      // N m s / rad

}  // namespace

void validate_coupling(const CouplingParams& p) {
  if (!(p.strap_stiffness > 0.0 && p.strap_damping > 0.0 &&
        p.pin_stop_stiffness > 0.0 && p.slider_stiffness > 0.0 &&
        p.slider_damping > 0.0 && p.misalignment_lever > 0.0 &&
        p.exo_link_mass > 0.0 && p.exo_com_distance > 0.0 &&
        p.exo_link_inertia > 0.0))
    throw std::invalid_argument("coupling: stiffness/damping/inertia must be > 0");
  if (!(p.slider_retention > 0.0) || p.slider_retention > 1.0)
    throw std::invalid_argument("coupling: slider_retention must be in (0,1]");
  if (!(p.pin_range_deg > 0.0 && p.slider_range > 0.0))
    throw std::invalid_argument("coupling: pin_range and slider_range must be > 0");
  if (!(p.exo_theta_min_deg < p.exo_theta_max_deg))
    throw std::invalid_argument("coupling: exo joint range is empty");
}

double actuator_torque(ActuatorCommand cmd) {
  return std::clamp(kActuatorMaxTorque * cmd.u, -kActuatorMaxTorque,
                    kActuatorMaxTorque);
}

double strap_torque(const ExoState& exo, double ms_theta, double ms_omega,
                    const CouplingParams& p) {
  const double delta = exo.theta_exo - ms_theta;
  double tau = p.strap_stiffness * delta +
               p.strap_damping * (exo.omega_exo - ms_omega);
  const double range = deg_to_rad(p.pin_range_deg);
  if (delta > range) {
    tau += p.pin_stop_stiffness * (delta - range);
  } else if (delta < -range) {
    tau += p.pin_stop_stiffness * (delta + range);
  }
  return tau;
}

double slider_step(ExoState& exo, double strap_torque_flex, double dt,
                   const CouplingParams& p) {
  const double load = strap_torque_flex / p.misalignment_lever;
  const double force = load - p.slider_stiffness * exo.slider_pos -
                       p.slider_damping * exo.slider_vel;
  exo.slider_vel += dt * force / kSliderMass;
  exo.slider_vel *= p.slider_retention;
  exo.slider_pos += dt * exo.slider_vel;
  if (exo.slider_pos > p.slider_range) {
    exo.slider_pos = p.slider_range;
    if (exo.slider_vel > 0.0) exo.slider_vel = 0.0;
  } else if (exo.slider_pos < -p.slider_range) {
    exo.slider_pos = -p.slider_range;
    if (exo.slider_vel < 0.0) exo.slider_vel = 0.0;
  }
  const double restoring =
      p.slider_stiffness * exo.slider_pos + p.slider_damping * exo.slider_vel;
  return restoring * p.misalignment_lever;
}

void exo_step(ExoState& exo, ActuatorCommand cmd, double reaction_torque_flex,
              double dt, const CouplingParams& p) {
  if (!(dt > 0.0) || dt > 0.005)
    throw std::invalid_argument("exo_step: dt must be in (0, 0.005]");

  // Actuator and exo gravity are extension-positive; reaction from the human
  // coupling arrives flexion-positive and acts negated here.
  const double gravity_ext = -p.exo_link_mass * kGravity * p.exo_com_distance *
                             std::cos(exo.theta_exo);
  double tau_flex = -(actuator_torque(cmd) + gravity_ext) - reaction_torque_flex;

  const double lo = deg_to_rad(p.exo_theta_min_deg);
  const double hi = deg_to_rad(p.exo_theta_max_deg);
  if (exo.theta_exo > hi) {
    tau_flex += -kExoStopStiffness * (exo.theta_exo - hi) -
                kExoStopDamping * exo.omega_exo;
  } else if (exo.theta_exo < lo) {
    tau_flex += kExoStopStiffness * (lo - exo.theta_exo) -
                kExoStopDamping * exo.omega_exo;
  }

  exo.omega_exo += dt * tau_flex / p.exo_link_inertia;
  exo.theta_exo += dt * exo.omega_exo;
  if (exo.theta_exo > hi) {
    exo.theta_exo = hi;
    if (exo.omega_exo > 0.0) exo.omega_exo = 0.0;
  } else if (exo.theta_exo < lo) {
    exo.theta_exo = lo;
    if (exo.omega_exo < 0.0) exo.omega_exo = 0.0;
  }

  if (!std::isfinite(exo.theta_exo) || !std::isfinite(exo.omega_exo) ||
      !std::isfinite(exo.slider_pos) || !std::isfinite(exo.slider_vel)) {
    throw std::runtime_error("exo_step: non-finite exo state");
  }
}

double interaction_torque(double strap, double misalignment, double spastic) {
  return strap + misalignment + spastic;
}

}  // namespace exotwin
