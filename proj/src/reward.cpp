#include "exotwin/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace exotwin {

namespace {

// Velocity-change normalization: the severity-0 stretch-velocity bound.
constexpr double kOmegaNorm = 10.0;  // rad/s

}  // namespace

void validate_reward(const RewardConfig& c) {
  if (!(c.sigma_sq > 0.0 && c.tau_threshold > 0.0 && c.tau_norm > 0.0 &&
        c.bonus > 0.0 && c.bonus_pos_band > 0.0 && c.bonus_vel_band > 0.0))
    throw std::invalid_argument("reward: scale fields must be > 0");
  if (!(c.w_pose >= 0.0 && c.w_inter >= 0.0 && c.w_vel >= 0.0 &&
        c.w_act >= 0.0))
    throw std::invalid_argument("reward: weights must be >= 0");
  if (!(c.tau_threshold < c.tau_norm))
    throw std::invalid_argument("reward: tau_threshold must be < tau_norm");
}

double r_pose(const StepSnapshot& s, const RewardConfig& c) {
  const double e = s.pose_error;
  double r = c.w_pose * (std::exp(-e / (2.0 * c.sigma_sq)) - e);
  if (e < c.bonus_pos_band && std::abs(s.knee_vel) < c.bonus_vel_band)
    r += c.bonus;
  return r;
}

double r_inter(const StepSnapshot& s, const RewardConfig& c) {
  const double tau = s.interaction_torque;
  const double dtau = (tau - s.prev_interaction_torque) / c.tau_norm;
  double penalty = dtau * dtau;
  if (std::abs(tau) > c.tau_threshold) {
    const double t = tau / c.tau_norm;
    penalty += t * t;
  }
  return -c.w_inter * penalty;
}

double r_act(const StepSnapshot& s, const RewardConfig& c) {
  const double du = s.action - s.prev_action;
  return -c.w_act * du * du;
}

double r_vel(const StepSnapshot& s, const RewardConfig& c) {
  return -c.w_vel * std::abs(s.knee_vel - s.prev_knee_vel) / kOmegaNorm;
}

double total_reward(const StepSnapshot& s, const RewardConfig& c) {
  return r_pose(s, c) + r_inter(s, c) + r_act(s, c) + r_vel(s, c);
}

}  // namespace exotwin
