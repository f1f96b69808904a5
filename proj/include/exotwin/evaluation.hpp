#pragma once

// Trial metrics (settling time, RMS interaction torque to settling, peak
// torque, steady error), cohort aggregation over randomized subjects, and
// two-cohort comparison tables.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "exotwin/environment.hpp"

namespace exotwin {

constexpr double kMovementAmplitudeDeg = 83.0;
constexpr double kSettlingBandFrac = 0.02;

struct TrialMetrics {
  std::string controller;
  int level = 0;
  std::uint64_t seed = 0;
  std::optional<double> settling_time;  // s; empty when never settled
  double rms_to_settling = 0.0;         // N m
  double peak_torque = 0.0;             // N m
  double steady_state_error_deg = 0.0;
};

/// mean/std/median/IQR of one metric across trials.
struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  double iqr_lo = 0.0;  // 25th percentile
  double iqr_hi = 0.0;  // 75th percentile
};

/// Computed over a sorted copy; stddev is the population value.
MetricStats metric_stats(std::vector<double> values);

struct LevelSummary {
  int level = 0;
  int count = 0;
  int not_settled = 0;
  MetricStats settling;  // unsettled trials enter as the episode duration
  MetricStats rms;
  MetricStats peak;
  MetricStats sse;
};

struct CohortSummary {
  std::string controller;
  std::uint64_t master_seed = 0;
  int trials_per_level = 0;
  std::vector<LevelSummary> levels;
};

/// Earliest time after which theta never leaves a band of
/// band_frac * amplitude centered on the trace's own final value. Samples
/// are taken at t = dt, 2 dt, ...; a trace that is in band throughout
/// settles at 0. Returns nullopt when the band is entered only at the last
/// sample. Throws on an empty trace.
std::optional<double> settling_time(
    const std::vector<double>& theta, double dt,
    double amplitude = deg_to_rad(kMovementAmplitudeDeg),
    double band_frac = kSettlingBandFrac);

/// RMS of the torque trace over [0, settling]; the window always contains
/// at least the first sample and covers the full trace when not settled.
double rms_to_settling(const std::vector<double>& torque, double dt,
                       std::optional<double> settling);

/// max |tau| over the trace. Throws on an empty trace.
double peak_torque(const std::vector<double>& torque);

TrialMetrics trial_metrics(const EpisodeTrace& trace, double target_rad,
                           const std::string& controller_id);

/// Factory returning a fresh controller per trial, so stateful controllers
/// start each episode clean.
using ControllerFactory = std::function<Controller()>;

struct CohortResult {
  CohortSummary summary;
  std::vector<TrialMetrics> trials;
};

/// n_trials independent seeded trials per level, each on a freshly sampled
/// subject; trial seeds derive from the master seed and the (level, index)
/// pair. Deterministic for a fixed master seed.
CohortResult run_cohort(const ControllerFactory& make_controller,
                        const std::string& controller_id,
                        const EnvConfig& cfg, const std::vector<int>& levels,
                        int n_trials, std::uint64_t master_seed);

/// Per-trial CSV: controller,level,seed,settling_s,rms_nm,peak_nm,sse_deg.
/// settling_s holds `not_settled` for unsettled trials. 17-significant-digit
/// serialization; write/read round-trips bit-exactly.
void write_trials_csv(const std::vector<TrialMetrics>& trials,
                      const std::string& path);
std::vector<TrialMetrics> read_trials_csv(const std::string& path);

void write_summary_csv(const CohortSummary& summary, const std::string& path);
CohortSummary read_summary_csv(const std::string& path);

struct LevelDelta {
  int level = 0;
  double rms_reduction_pct = 0.0;   // 100 (a - b) / a on mean RMS
  double peak_reduction_pct = 0.0;  // same on mean peak torque
  double peak_delta_nm = 0.0;       // mean_a - mean_b
  double settling_delta_s = 0.0;    // mean_a - mean_b
};

/// How cohort b improves on cohort a, per level plus the mean +- std of the
/// per-level peak-torque deltas. Throws when levels or trial counts differ.
struct Comparison {
  std::vector<LevelDelta> levels;
  double mean_peak_delta_nm = 0.0;
  double std_peak_delta_nm = 0.0;
};

Comparison compare(const CohortSummary& a, const CohortSummary& b);

void write_comparison_csv(const Comparison& cmp, const std::string& path);

/// Aligned, human-readable table of the same numbers.
std::string format_comparison(const Comparison& cmp, const std::string& name_a,
                              const std::string& name_b);

}  // namespace exotwin
