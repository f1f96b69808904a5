#include "exotwin/spasticity.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace exotwin {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

// Canonical level table: joint range (deg), velocity band (rad/s),
// activation ceilings, transition slope. Mirrors configs/default.json.
struct LevelRow {
  double theta_flex, theta_ext;  // deg
  double v_abs;                  // rad/s, band is [-v_abs, v_abs]
  double s_theta, s_v;
  double k;  // 1/deg for angle, 1/(deg/s) for velocity
};

constexpr LevelRow kLevelTable[SpasticityLevel::kCount] = {
    {-45.0, 95.0, 10.0, 0.0, 0.0, 0.0},
    {-35.0, 80.0, 1.0, 0.2, 0.2, 0.5},
    {-30.0, 75.0, 0.5, 0.3, 0.3, 0.2},
    {-15.0, 60.0, 0.25, 0.3, 0.5, 0.1},
};

}  // namespace

SpasticityLevel::SpasticityLevel(int id) : id_(id) {
  if (id < 0 || id >= kCount) {
    throw std::invalid_argument("spasticity level " + std::to_string(id) +
                                " not implemented (valid: 0..3)");
  }
}

const char* muscle_name(MuscleId id) {
  switch (id) {
    case MuscleId::kGastrocLat: return "gastroc_lat";
    case MuscleId::kGastrocMed: return "gastroc_med";
    case MuscleId::kSemimem: return "semimem";
    case MuscleId::kSemiten: return "semiten";
    case MuscleId::kBicFemLong: return "bicfem_long";
    case MuscleId::kBicFemShort: return "bicfem_short";
    case MuscleId::kGracilis: return "gracilis";
    case MuscleId::kVastusMed: return "vastus_med";
    case MuscleId::kVastusLat: return "vastus_lat";
    case MuscleId::kVastusInt: return "vastus_int";
    case MuscleId::kRectusFem: return "rectus_fem";
  }
  return "unknown";
}

void MuscleGroupMap::validate() const {
  std::set<int> seen;
  for (MuscleId m : flexors) seen.insert(static_cast<int>(m));
  for (MuscleId m : extensors) seen.insert(static_cast<int>(m));
  if (seen.size() != kMuscleCount) {
    throw std::invalid_argument("muscle group map must cover 11 distinct muscles");
  }
}

SubjectParams canonical_params(SpasticityLevel level) {
  const LevelRow& row = kLevelTable[level.id()];
  SubjectParams p;
  p.level = level;
  p.theta_flex_deg = row.theta_flex;
  p.theta_ext_deg = row.theta_ext;
  p.v_lower = -row.v_abs;
  p.v_upper = row.v_abs;
  p.s_theta_max = row.s_theta;
  p.s_v_max = row.s_v;
  p.k_ang = row.k;
  p.k_vel = row.k;
  return p;
}

void validate_subject(const SubjectParams& p) {
  if (!(p.theta_flex_deg < p.theta_ext_deg))
    throw std::invalid_argument("subject: theta_flex must be < theta_ext");
  if (!(p.v_lower < p.v_upper))
    throw std::invalid_argument("subject: v_lower must be < v_upper");
  if (p.s_theta_max < 0.0 || p.s_theta_max > 1.0 || p.s_v_max < 0.0 ||
      p.s_v_max > 1.0)
    throw std::invalid_argument("subject: activation ceilings must be in [0,1]");
  if (p.k_ang < 0.0 || p.k_vel < 0.0)
    throw std::invalid_argument("subject: sigmoid slopes must be >= 0");
}

double sigmoid_phi(double k, double beta, double beta0) {
  const double arg = std::clamp(-k * (beta - beta0), -500.0, 500.0);
  return 1.0 / (1.0 + std::exp(arg));
}

double sigmoid_phi_dbeta(double k, double beta, double beta0) {
  const double phi = sigmoid_phi(k, beta, beta0);
  return k * phi * (1.0 - phi);
}

double sc_angular(double theta_deg, const SubjectParams& p) {
  const double lo = sigmoid_phi(p.k_ang, theta_deg, p.theta_flex_deg);
  const double hi = sigmoid_phi(p.k_ang, theta_deg, p.theta_ext_deg);
  return p.s_theta_max * (1.0 - (lo - hi));
}

double sc_velocity(double v, const SubjectParams& p) {
  const double v_deg = v * kRadToDeg;
  const double lo = sigmoid_phi(p.k_vel, v_deg, p.v_lower * kRadToDeg);
  const double hi = sigmoid_phi(p.k_vel, v_deg, p.v_upper * kRadToDeg);
  return p.s_v_max * (1.0 - (lo - hi));
}

double sc_total(double theta_deg, double v, const SubjectParams& p) {
  return std::clamp(sc_angular(theta_deg, p) + sc_velocity(v, p), 0.0, 1.0);
}

double sc_angular_dtheta(double theta_deg, const SubjectParams& p) {
  const double dlo = sigmoid_phi_dbeta(p.k_ang, theta_deg, p.theta_flex_deg);
  const double dhi = sigmoid_phi_dbeta(p.k_ang, theta_deg, p.theta_ext_deg);
  return -p.s_theta_max * (dlo - dhi);
}

double sc_velocity_dv(double v, const SubjectParams& p) {
  const double v_deg = v * kRadToDeg;
  const double dlo = sigmoid_phi_dbeta(p.k_vel, v_deg, p.v_lower * kRadToDeg);
  const double dhi = sigmoid_phi_dbeta(p.k_vel, v_deg, p.v_upper * kRadToDeg);
  // chain rule for the rad/s -> deg/s conversion
  return -p.s_v_max * (dlo - dhi) * kRadToDeg;
}

std::array<SubjectParams, SpasticityLevel::kCount> default_level_table() {
  std::array<SubjectParams, SpasticityLevel::kCount> table{};
  for (int i = 0; i < SpasticityLevel::kCount; ++i)
    table[static_cast<std::size_t>(i)] = canonical_params(SpasticityLevel{i});
  return table;
}

SubjectParams sample_subject(SpasticityLevel level, std::uint64_t seed,
                             double noise_frac) {
  Rng rng = make_rng(seed);
  return sample_subject(level, rng, noise_frac);
}

SubjectParams sample_subject(SpasticityLevel level, Rng& rng,
                             double noise_frac) {
  return sample_subject(canonical_params(level), rng, noise_frac);
}

SubjectParams sample_subject(const SubjectParams& base, Rng& rng,
                             double noise_frac) {
  if (noise_frac < 0.0)
    throw std::invalid_argument("sample_subject: noise_frac must be >= 0");
  validate_subject(base);
  std::normal_distribution<double> unit(0.0, 1.0);

  auto draw = [&](double value) {
    return value + noise_frac * std::fabs(value) * unit(rng);
  };
  // Redraw a single field until pred holds; statistics stay Gaussian because
  // rejected draws are discarded, not clamped.
  auto draw_until = [&](double value, auto pred) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double x = draw(value);
      if (pred(x)) return x;
    }
    throw std::runtime_error(
        "sample_subject: could not satisfy parameter invariants after 100 "
        "redraws (noise_frac too large?)");
  };

  SubjectParams p = base;
  p.theta_flex_deg = draw(base.theta_flex_deg);
  p.theta_ext_deg =
      draw_until(base.theta_ext_deg, [&](double x) { return x > p.theta_flex_deg; });
  p.v_lower = draw(base.v_lower);
  p.v_upper = draw_until(base.v_upper, [&](double x) { return x > p.v_lower; });
  p.s_theta_max = draw_until(base.s_theta_max,
                             [](double x) { return x >= 0.0 && x <= 1.0; });
  p.s_v_max =
      draw_until(base.s_v_max, [](double x) { return x >= 0.0 && x <= 1.0; });
  p.k_ang = draw_until(base.k_ang, [](double x) { return x >= 0.0; });
  p.k_vel = draw_until(base.k_vel, [](double x) { return x >= 0.0; });
  validate_subject(p);
  return p;
}

std::array<double, kMuscleCount> spastic_activations(
    double theta_deg, double v, double omega_sign, const SubjectParams& p,
    const MuscleGroupMap& map) {
  std::array<double, kMuscleCount> act{};
  act.fill(0.0);

  // Lance: reflexes fire in the muscles being stretched. Extension (omega < 0
  // in the flexion-positive convention) stretches the flexion group, flexion
  // stretches the extension group. At rest the angular term goes to the group
  // that opposes the violated side of the range.
  double value = 0.0;
  bool to_flexors = false;
  if (omega_sign < 0.0) {
    value = sc_total(theta_deg, v, p);
    to_flexors = true;
  } else if (omega_sign > 0.0) {
    value = sc_total(theta_deg, v, p);
    to_flexors = false;
  } else {
    value = std::clamp(sc_angular(theta_deg, p), 0.0, 1.0);
    const double midrange = 0.5 * (p.theta_flex_deg + p.theta_ext_deg);
    to_flexors = theta_deg < midrange;  // low side violated -> flexors
  }

  if (to_flexors) {
    for (MuscleId m : map.flexors) act[static_cast<int>(m)] = value;
  } else {
    for (MuscleId m : map.extensors) act[static_cast<int>(m)] = value;
  }
  return act;
}

}  // namespace exotwin
