#pragma once

// Baseline torque controller: PID on the angular position error with
// integral clamping and a zero-kick first derivative. Output is the
// normalized actuator command.

#include "exotwin/environment.hpp"

namespace exotwin {

struct PidGains {
  double kp = 7.0;              // N m / rad
  double ki = 40.0;             // N m / (rad s)
  double kd = 0.05;             // N m s / rad
  double integral_limit = 14.0;  // N m, clamp on the accumulated ki term
};

void validate_pid(const PidGains& g);

class PidController {
 public:
  /// control_dt is the step used by the observation adapter below.
  explicit PidController(PidGains gains = PidGains{}, double control_dt = 0.01);

  /// Clears the integral and the previous-error memory.
  void reset();

  /// error in rad, dt > 0. Returns u in [-1, 1]: the torque
  /// kp e + ki int(e dt) + kd de/dt clamped to +-100 N m and divided by 100.
  /// The first call after reset() uses a zero derivative.
  double action(double error, double dt);

  /// Adapter reading the signed pose error out of an observation.
  double operator()(const Observation& obs);

  double integral_term() const { return integral_; }

 private:
  PidGains gains_;
  double integral_ = 0.0;  // accumulated ki contribution, N m
  double prev_error_ = 0.0;
  bool has_prev_ = false;
  double dt_ = 0.01;
};

}  // namespace exotwin
