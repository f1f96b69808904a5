#include "exotwin/pid.hpp"

#include <algorithm>
#include <stdexcept>

namespace exotwin {

void validate_pid(const PidGains& g) {
  if (!(g.kp >= 0.0 && g.ki >= 0.0 && g.kd >= 0.0))
    throw std::invalid_argument("pid: gains must be >= 0");
  if (!(g.integral_limit > 0.0))
    throw std::invalid_argument("pid: integral_limit must be > 0");
}

PidController::PidController(PidGains gains, double control_dt)
    : gains_(gains), dt_(control_dt) {
  validate_pid(gains_);
  if (!(control_dt > 0.0))
    throw std::invalid_argument("pid: control_dt must be > 0");
}

void PidController::reset() {
  integral_ = 0.0;
  prev_error_ = 0.0;
  has_prev_ = false;
}

double PidController::action(double error, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("pid: dt must be > 0");
  integral_ = std::clamp(integral_ + gains_.ki * error * dt,
                         -gains_.integral_limit, gains_.integral_limit);
  const double derivative = has_prev_ ? (error - prev_error_) / dt : 0.0;
  prev_error_ = error;
  has_prev_ = true;
  const double tau = std::clamp(
      gains_.kp * error + integral_ + gains_.kd * derivative,
      -kActuatorMaxTorque, kActuatorMaxTorque);
  return tau / kActuatorMaxTorque;
}

double PidController::operator()(const Observation& obs) {
  return action(obs[31], dt_);
}

}  // namespace exotwin
