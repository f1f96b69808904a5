#include "exotwin/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace exotwin {

namespace {

double percentile(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str())
    throw std::runtime_error("bad numeric cell '" + s + "' in " + context);
  return v;
}

}  // namespace

MetricStats metric_stats(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("metric_stats: no values");
  MetricStats st;
  double sum = 0.0;
  for (double v : values) sum += v;
  st.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - st.mean) * (v - st.mean);
  st.stddev = std::sqrt(var / static_cast<double>(values.size()));
  std::sort(values.begin(), values.end());
  st.median = percentile(values, 0.5);
  st.iqr_lo = percentile(values, 0.25);
  st.iqr_hi = percentile(values, 0.75);
  return st;
}

std::optional<double> settling_time(const std::vector<double>& theta,
                                    double dt, double amplitude,
                                    double band_frac) {
  if (theta.empty()) throw std::invalid_argument("settling_time: empty trace");
  if (!(dt > 0.0)) throw std::invalid_argument("settling_time: dt must be > 0");
  const double band = band_frac * amplitude;
  const double final_value = theta.back();
  std::ptrdiff_t last_out = -1;
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(theta.size()) - 1;
       i >= 0; --i) {
    if (std::abs(theta[static_cast<std::size_t>(i)] - final_value) > band) {
      last_out = i;
      break;
    }
  }
  if (last_out < 0) return 0.0;
  if (last_out >= static_cast<std::ptrdiff_t>(theta.size()) - 2)
    return std::nullopt;  // in band only at the final sample
  return static_cast<double>(last_out + 1) * dt;
}

double rms_to_settling(const std::vector<double>& torque, double dt,
                       std::optional<double> settling) {
  if (torque.empty())
    throw std::invalid_argument("rms_to_settling: empty trace");
  if (!(dt > 0.0))
    throw std::invalid_argument("rms_to_settling: dt must be > 0");
  std::size_t n = torque.size();
  if (settling) {
    const double samples = std::round(*settling / dt);
    n = static_cast<std::size_t>(
        std::clamp(samples, 1.0, static_cast<double>(torque.size())));
  }
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum_sq += torque[i] * torque[i];
  return std::sqrt(sum_sq / static_cast<double>(n));
}

double peak_torque(const std::vector<double>& torque) {
  if (torque.empty()) throw std::invalid_argument("peak_torque: empty trace");
  double peak = 0.0;
  for (double t : torque) peak = std::max(peak, std::abs(t));
  return peak;
}

TrialMetrics trial_metrics(const EpisodeTrace& trace, double target_rad,
                           const std::string& controller_id) {
  TrialMetrics m;
  m.controller = controller_id;
  m.level = trace.level;
  m.seed = trace.seed;
  const double dt = trace.time.front();
  m.settling_time = settling_time(trace.theta, dt);
  m.rms_to_settling = rms_to_settling(trace.tau_int, dt, m.settling_time);
  m.peak_torque = peak_torque(trace.tau_int);
  m.steady_state_error_deg =
      std::abs(rad_to_deg(trace.theta.back() - target_rad));
  return m;
}

CohortResult run_cohort(const ControllerFactory& make_controller,
                        const std::string& controller_id,
                        const EnvConfig& cfg, const std::vector<int>& levels,
                        int n_trials, std::uint64_t master_seed) {
  if (n_trials <= 0)
    throw std::invalid_argument("run_cohort: n_trials must be > 0");
  if (levels.empty())
    throw std::invalid_argument("run_cohort: levels must be non-empty");

  CohortResult result;
  result.summary.controller = controller_id;
  result.summary.master_seed = master_seed;
  result.summary.trials_per_level = n_trials;
  const double target = deg_to_rad(cfg.target_angle_deg);

  for (int level : levels) {
    std::vector<double> settling, rms, peak, sse;
    LevelSummary ls;
    ls.level = level;
    ls.count = n_trials;
    for (int i = 0; i < n_trials; ++i) {
      const std::uint64_t stream =
          (static_cast<std::uint64_t>(level) << 32) |
          static_cast<std::uint64_t>(i);
      const std::uint64_t trial_seed = derive_seed(master_seed, stream);
      Controller controller = make_controller();
      EpisodeTrace trace;
      try {
        trace = run_episode(controller, cfg, level, trial_seed);
      } catch (const std::exception& e) {
        throw std::runtime_error("cohort trial " + std::to_string(i) +
                                 " (level " + std::to_string(level) +
                                 ") failed: " + e.what());
      }
      TrialMetrics m = trial_metrics(trace, target, controller_id);
      settling.push_back(m.settling_time ? *m.settling_time
                                         : cfg.episode_duration);
      if (!m.settling_time) ++ls.not_settled;
      rms.push_back(m.rms_to_settling);
      peak.push_back(m.peak_torque);
      sse.push_back(m.steady_state_error_deg);
      result.trials.push_back(std::move(m));
    }
    ls.settling = metric_stats(std::move(settling));
    ls.rms = metric_stats(std::move(rms));
    ls.peak = metric_stats(std::move(peak));
    ls.sse = metric_stats(std::move(sse));
    result.summary.levels.push_back(ls);
  }
  return result;
}

void write_trials_csv(const std::vector<TrialMetrics>& trials,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trials file: " + path);
  out << "controller,level,seed,settling_s,rms_nm,peak_nm,sse_deg\n";
  char buf[512];
  for (const TrialMetrics& m : trials) {
    std::string settling = "not_settled";
    if (m.settling_time) {
      std::snprintf(buf, sizeof(buf), "%.17g", *m.settling_time);
      settling = buf;
    }
    std::snprintf(buf, sizeof(buf), "%s,%d,%llu,%s,%.17g,%.17g,%.17g\n",
                  m.controller.c_str(), m.level,
                  static_cast<unsigned long long>(m.seed), settling.c_str(),
                  m.rms_to_settling, m.peak_torque, m.steady_state_error_deg);
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing trials file: " + path);
}

std::vector<TrialMetrics> read_trials_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trials file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "controller,level,seed,settling_s,rms_nm,peak_nm,sse_deg")
    throw std::runtime_error("bad trials header in " + path);
  std::vector<TrialMetrics> trials;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 7)
      throw std::runtime_error("bad trials row in " + path + ": " + line);
    TrialMetrics m;
    m.controller = cells[0];
    m.level = static_cast<int>(parse_double(cells[1], path));
    m.seed = std::strtoull(cells[2].c_str(), nullptr, 10);
    if (cells[3] != "not_settled")
      m.settling_time = parse_double(cells[3], path);
    m.rms_to_settling = parse_double(cells[4], path);
    m.peak_torque = parse_double(cells[5], path);
    m.steady_state_error_deg = parse_double(cells[6], path);
    trials.push_back(std::move(m));
  }
  return trials;
}

namespace {

constexpr const char* kSummaryHeader =
    "controller,master_seed,level,count,not_settled,metric,mean,stddev,"
    "median,iqr_lo,iqr_hi";

void write_stats_row(std::ofstream& out, const CohortSummary& s,
                     const LevelSummary& ls, const char* metric,
                     const MetricStats& st) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%llu,%d,%d,%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                s.controller.c_str(),
                static_cast<unsigned long long>(s.master_seed), ls.level,
                ls.count, ls.not_settled, metric, st.mean, st.stddev,
                st.median, st.iqr_lo, st.iqr_hi);
  out << buf;
}

}  // namespace

void write_summary_csv(const CohortSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open summary file: " + path);
  out << kSummaryHeader << "\n";
  for (const LevelSummary& ls : summary.levels) {
    write_stats_row(out, summary, ls, "settling_s", ls.settling);
    write_stats_row(out, summary, ls, "rms_nm", ls.rms);
    write_stats_row(out, summary, ls, "peak_nm", ls.peak);
    write_stats_row(out, summary, ls, "sse_deg", ls.sse);
  }
  if (!out) throw std::runtime_error("failed writing summary file: " + path);
}

CohortSummary read_summary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read summary file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kSummaryHeader)
    throw std::runtime_error("bad summary header in " + path);
  CohortSummary summary;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 11)
      throw std::runtime_error("bad summary row in " + path + ": " + line);
    summary.controller = cells[0];
    summary.master_seed = std::strtoull(cells[1].c_str(), nullptr, 10);
    const int level = static_cast<int>(parse_double(cells[2], path));
    if (summary.levels.empty() || summary.levels.back().level != level) {
      LevelSummary ls;
      ls.level = level;
      ls.count = static_cast<int>(parse_double(cells[3], path));
      ls.not_settled = static_cast<int>(parse_double(cells[4], path));
      summary.levels.push_back(ls);
      summary.trials_per_level = ls.count;
    }
    MetricStats st;
    st.mean = parse_double(cells[6], path);
    st.stddev = parse_double(cells[7], path);
    st.median = parse_double(cells[8], path);
    st.iqr_lo = parse_double(cells[9], path);
    st.iqr_hi = parse_double(cells[10], path);
    LevelSummary& ls = summary.levels.back();
    if (cells[5] == "settling_s") ls.settling = st;
    else if (cells[5] == "rms_nm") ls.rms = st;
    else if (cells[5] == "peak_nm") ls.peak = st;
    else if (cells[5] == "sse_deg") ls.sse = st;
    else throw std::runtime_error("unknown metric '" + cells[5] + "' in " + path);
  }
  if (summary.levels.empty())
    throw std::runtime_error("summary file has no rows: " + path);
  return summary;
}

Comparison compare(const CohortSummary& a, const CohortSummary& b) {
  if (a.levels.size() != b.levels.size())
    throw std::invalid_argument("compare: cohorts cover different levels");
  Comparison cmp;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.levels.size(); ++i) {
    const LevelSummary& la = a.levels[i];
    const LevelSummary& lb = b.levels[i];
    if (la.level != lb.level)
      throw std::invalid_argument("compare: level mismatch");
    if (la.count != lb.count)
      throw std::invalid_argument("compare: trial-count mismatch");
    LevelDelta d;
    d.level = la.level;
    d.rms_reduction_pct =
        la.rms.mean != 0.0 ? 100.0 * (la.rms.mean - lb.rms.mean) / la.rms.mean
                           : 0.0;
    d.peak_reduction_pct =
        la.peak.mean != 0.0
            ? 100.0 * (la.peak.mean - lb.peak.mean) / la.peak.mean
            : 0.0;
    d.peak_delta_nm = la.peak.mean - lb.peak.mean;
    d.settling_delta_s = la.settling.mean - lb.settling.mean;
    sum += d.peak_delta_nm;
    cmp.levels.push_back(d);
  }
  cmp.mean_peak_delta_nm = sum / static_cast<double>(cmp.levels.size());
  double var = 0.0;
  for (const LevelDelta& d : cmp.levels) {
    const double dev = d.peak_delta_nm - cmp.mean_peak_delta_nm;
    var += dev * dev;
  }
  cmp.std_peak_delta_nm =
      std::sqrt(var / static_cast<double>(cmp.levels.size()));
  return cmp;
}

void write_comparison_csv(const Comparison& cmp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open comparison file: " + path);
  out << "level,rms_reduction_pct,peak_reduction_pct,peak_delta_nm,"
         "settling_delta_s\n";
  char buf[512];
  for (const LevelDelta& d : cmp.levels) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", d.level,
                  d.rms_reduction_pct, d.peak_reduction_pct, d.peak_delta_nm,
                  d.settling_delta_s);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean_peak_delta_nm,%.17g\n",
                cmp.mean_peak_delta_nm);
  out << buf;
  std::snprintf(buf, sizeof(buf), "std_peak_delta_nm,%.17g\n",
                cmp.std_peak_delta_nm);
  out << buf;
  if (!out) throw std::runtime_error("failed writing comparison: " + path);
}

std::string format_comparison(const Comparison& cmp, const std::string& name_a,
                              const std::string& name_b) {
  std::ostringstream out;
  char buf[256];
  out << "comparison: " << name_b << " vs " << name_a << "\n";
  std::snprintf(buf, sizeof(buf), "%5s %12s %12s %12s %14s\n", "level",
                "rms_red_%", "peak_red_%", "peak_d_nm", "settling_d_s");
  out << buf;
  for (const LevelDelta& d : cmp.levels) {
    std::snprintf(buf, sizeof(buf), "%5d %12.2f %12.2f %12.2f %14.3f\n",
                  d.level, d.rms_reduction_pct, d.peak_reduction_pct,
                  d.peak_delta_nm, d.settling_delta_s);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean peak-torque delta: %.2f +- %.2f N m\n",
                cmp.mean_peak_delta_nm, cmp.std_peak_delta_nm);
  out << buf;
  return out.str();
}

}  // namespace exotwin
