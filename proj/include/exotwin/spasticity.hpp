#pragma once

// Differentiable spastic reflex model for the knee joint.
//
// Muscular activation is expressed as a spasticity coefficient in [0, 1],
// the fraction of maximum isometric force recruited by the reflex. The
// coefficient is the sum of an angular term (joint range violation) and a
// velocity term (stretch speed violation), each built from a pair of
// sigmoid transitions so the whole model is smooth in both inputs.
//
// Angle thresholds are in degrees, velocity limits in rad/s. Sigmoid slopes
// are 1/degree for the angle term; the velocity term converts rad/s to
// degree/s before applying its slope, so one slope value serves both axes.

#include <array>
#include <cstdint>

#include "exotwin/rng.hpp"

namespace exotwin {

/// Severity grade on the implemented portion of the Modified Ashworth Scale.
/// Grade 4 subjects cannot perform the movement and are rejected.
class SpasticityLevel {
 public:
  explicit SpasticityLevel(int id);
  int id() const { return id_; }

  static constexpr int kCount = 4;

 private:
  int id_;
};

/// One sampled individual: thresholds, activation ceilings and sigmoid slopes.
/// Immutable after construction; all model functions are pure.
struct SubjectParams {
  SpasticityLevel level{0};
  double theta_flex_deg = -45.0;  // lower knee-angle threshold
  double theta_ext_deg = 95.0;    // upper knee-angle threshold
  double v_lower = -10.0;         // rad/s
  double v_upper = 10.0;          // rad/s
  double s_theta_max = 0.0;       // angular activation ceiling, [0,1]
  double s_v_max = 0.0;           // velocity activation ceiling, [0,1]
  double k_ang = 0.0;             // sigmoid slope, 1/degree
  double k_vel = 0.0;             // sigmoid slope, 1/(degree/s)
};

constexpr int kMuscleCount = 11;
constexpr int kFlexorCount = 6;
constexpr int kExtensorCount = 5;

/// Index order of the 11 reflex-bearing muscles everywhere in this project:
/// entries 0..5 are the flexion group, 6..10 the extension group.
enum class MuscleId : int {
  kGastrocLat = 0,
  kGastrocMed,
  kSemimem,
  kSemiten,
  kBicFemLong,
  kBicFemShort,
  kGracilis,
  kVastusMed,
  kVastusLat,
  kVastusInt,
  kRectusFem,
};

const char* muscle_name(MuscleId id);

/// Flexion/extension grouping of the 11 muscles. The canonical map assigns
/// calf and hamstring muscles to flexion, gracilis and quadriceps to
/// extension.
struct MuscleGroupMap {
  std::array<MuscleId, kFlexorCount> flexors{
      MuscleId::kGastrocLat,  MuscleId::kGastrocMed, MuscleId::kSemimem,
      MuscleId::kSemiten,     MuscleId::kBicFemLong, MuscleId::kBicFemShort};
  std::array<MuscleId, kExtensorCount> extensors{
      MuscleId::kGracilis,   MuscleId::kVastusMed, MuscleId::kVastusLat,
      MuscleId::kVastusInt,  MuscleId::kRectusFem};

  /// Throws std::invalid_argument unless the groups cover 11 distinct muscles.
  void validate() const;
};

/// Exact canonical parameters for one severity level.
SubjectParams canonical_params(SpasticityLevel level);

/// Throws if params violate ordering/range invariants.
void validate_subject(const SubjectParams& p);

/// Increasing logistic transition: 1/(1 + exp(-k (beta - beta0))).
/// Exactly 0.5 at beta == beta0 (and everywhere when k == 0); the exponent
/// argument is clamped to +-500 so the tails saturate instead of overflowing.
double sigmoid_phi(double k, double beta, double beta0);

/// d/dbeta of sigmoid_phi.
double sigmoid_phi_dbeta(double k, double beta, double beta0);

/// Angular coefficient: ~0 inside [theta_flex, theta_ext], rises to
/// s_theta_max outside, half-max at either threshold. theta in degrees.
double sc_angular(double theta_deg, const SubjectParams& p);

/// Velocity coefficient, same construction over [v_lower, v_upper]. v in
/// rad/s.
double sc_velocity(double v, const SubjectParams& p);

/// Total coefficient, clamped to [0, 1].
double sc_total(double theta_deg, double v, const SubjectParams& p);

/// Analytic partial derivatives of the unclamped angular/velocity terms.
/// d_dtheta is per degree; d_dv per (rad/s).
double sc_angular_dtheta(double theta_deg, const SubjectParams& p);
double sc_velocity_dv(double v, const SubjectParams& p);

/// The four canonical rows as an indexable table (entry i has level i).
std::array<SubjectParams, SpasticityLevel::kCount> default_level_table();

/// Draws an individual around `base`: each nonzero field is perturbed with
/// Gaussian noise of sigma = noise_frac * |value|. Fields violating
/// ordering/range invariants are redrawn up to 100 times; throws
/// std::runtime_error if that fails.
SubjectParams sample_subject(const SubjectParams& base, Rng& rng,
                             double noise_frac = 0.10);
SubjectParams sample_subject(SpasticityLevel level, std::uint64_t seed,
                             double noise_frac = 0.10);
SubjectParams sample_subject(SpasticityLevel level, Rng& rng,
                             double noise_frac = 0.10);

/// Per-muscle reflex activations. The group lengthened by the current motion
/// receives sc_total; the other group receives zero. omega_sign is the sign
/// of the knee angular velocity (flexion positive); with omega_sign == 0 the
/// angular term alone is assigned to the group opposing the violated range
/// side. Returned in MuscleId order.
std::array<double, kMuscleCount> spastic_activations(
    double theta_deg, double v, double omega_sign, const SubjectParams& p,
    const MuscleGroupMap& map = MuscleGroupMap{});

}  // namespace exotwin
