#pragma once

// Four-term step reward for the extension task: pose tracking with a
// settling bonus, interaction-torque penalty, action-rate penalty and
// velocity-change penalty. All terms except the pose exponential are
// non-positive, so the total can never exceed 1 + bonus.

namespace exotwin {

struct RewardConfig {
  double sigma_sq = 0.25;        // rad, growth factor of the pose exponential
  double tau_threshold = 75.0;   // N m, torque magnitude where the quadratic
                                 // interaction penalty switches on
  double tau_norm = 100.0;       // N m, torque normalization
  double bonus = 0.01;           // per-step settling bonus
  double bonus_pos_band = 0.05;  // rad, |error| band for the bonus
  double bonus_vel_band = 0.05;  // rad/s, |velocity| band for the bonus
  double w_pose = 1.0;
  double w_inter = 1.0;
  double w_vel = 1.0;
  double w_act = 1.0;
};

void validate_reward(const RewardConfig& c);

/// Control-rate sample of everything the reward reads. pose_error is the
/// absolute angular error in radians; torques are the signed interaction
/// torque at this and the previous control step.
struct StepSnapshot {
  double pose_error = 0.0;              // rad, >= 0
  double knee_vel = 0.0;                // rad/s
  double interaction_torque = 0.0;      // N m
  double prev_interaction_torque = 0.0; // N m
  double action = 0.0;                  // [-1, 1]
  double prev_action = 0.0;
  double prev_knee_vel = 0.0;           // rad/s
};

/// w_pose * (exp(-e / (2 sigma_sq)) - e), plus `bonus` when |error| and
/// |velocity| are both strictly inside their bands.
double r_pose(const StepSnapshot& s, const RewardConfig& c);

/// -w_inter * [(dtau/tau_norm)^2 + 1(|tau| > tau_threshold) (tau/tau_norm)^2].
double r_inter(const StepSnapshot& s, const RewardConfig& c);

/// -w_act * (action - prev_action)^2.
double r_act(const StepSnapshot& s, const RewardConfig& c);

/// -w_vel * |knee_vel - prev_knee_vel| / 10.
double r_vel(const StepSnapshot& s, const RewardConfig& c);

/// Sum of the four terms above.
double total_reward(const StepSnapshot& s, const RewardConfig& c);

}  // namespace exotwin
