#include "exotwin/cli.hpp"

#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "exotwin/config.hpp"
#include "exotwin/evaluation.hpp"
#include "exotwin/pid.hpp"
#include "exotwin/sac.hpp"

namespace exotwin {

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void on_sigint(int) { g_interrupted = 1; }

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

RunConfig load_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_config(path);
}

struct ControllerSpec {
  std::string id;
  ControllerFactory factory;
};

/// ConfigError for flag misuse, std::runtime_error for a bad checkpoint.
ControllerSpec make_controller_spec(const std::string& checkpoint,
                                    bool use_pid, const RunConfig& cfg) {
  if (use_pid == !checkpoint.empty())
    throw ConfigError("exactly one of --pid and --checkpoint is required");
  if (use_pid) {
    const PidGains gains = cfg.pid;
    const double dt = cfg.env.control_dt;
    return {"pid",
            [gains, dt]() { return Controller(PidController(gains, dt)); }};
  }
  auto nets = std::make_shared<SacNetworks>(load_checkpoint(checkpoint));
  return {"sac", [nets]() {
            return Controller([nets](const Observation& obs) {
              return deterministic_action(nets->actor, obs);
            });
          }};
}

std::string settling_text(const MetricStats& s, int not_settled) {
  std::string out = format_g17(s.mean) + " s mean";
  if (not_settled > 0)
    out += " (" + std::to_string(not_settled) + " not settled)";
  return out;
}

}  // namespace

void install_interrupt_handler() { std::signal(SIGINT, on_sigint); }

bool interrupt_requested() { return g_interrupted != 0; }

void clear_interrupt() { g_interrupted = 0; }

std::string resolve_run_dir(const std::string& requested,
                            const std::string& name) {
  namespace fs = std::filesystem;
  fs::path dir;
  if (!requested.empty()) {
    dir = requested;
  } else {
    const char* root = std::getenv("EXOTWIN_OUT_ROOT");
    const fs::path base = (root != nullptr && *root != '\0') ? fs::path(root)
                                                            : fs::path("runs");
    const fs::path stem = base / (timestamp() + "-" + name);
    dir = stem;
    for (int n = 1; fs::exists(dir); ++n)
      dir = fs::path(stem.string() + "-" + std::to_string(n));
  }
  fs::create_directories(dir);
  return dir.string();
}

int cmd_train(const TrainOptions& opt, std::ostream& log) {
  RunConfig cfg;
  try {
    cfg = load_or_default(opt.config_path);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.steps) cfg.sac.total_steps = *opt.steps;
    if (opt.level) cfg.env.levels = {*opt.level};
    validate_env(cfg.env);
    validate_sac(cfg.sac);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  std::string run_dir;
  try {
    run_dir = resolve_run_dir(opt.out_dir, "train");
    cfg.out_dir = run_dir;
    save_resolved_config(cfg, run_dir + "/resolved_config.json");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitArtifact;
  }
  log << "run dir: " << run_dir << "\n";
  const TrainResult result =
      train(cfg.env, cfg.sac, cfg.seed, interrupt_requested, &log);
  try {
    save_checkpoint(result.best, run_dir + "/best.ckpt");
    save_checkpoint(result.final_nets, run_dir + "/final.ckpt");
    write_curve_csv(result.curve, run_dir + "/curve.csv");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitArtifact;
  }
  log << "steps run: " << result.steps_run << "\n";
  if (!result.curve.empty())
    log << "best eval return " << format_g17(result.best_return) << " at step "
        << result.best_step << "\n";
  if (result.interrupted) {
    log << "interrupted; partial artifacts kept\n";
    return kExitInterrupted;
  }
  return kExitOk;
}

int cmd_eval(const EvalOptions& opt, std::ostream& log) {
  RunConfig cfg;
  try {
    cfg = load_or_default(opt.config_path);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.levels) cfg.cohort.levels = *opt.levels;
    if (opt.trials) cfg.cohort.trials = *opt.trials;
    validate_env(cfg.env);
    if (cfg.cohort.trials <= 0) throw ConfigError("--trials must be > 0");
    if (cfg.cohort.levels.empty()) throw ConfigError("no levels selected");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  ControllerSpec spec;
  try {
    spec = make_controller_spec(opt.checkpoint, opt.use_pid, cfg);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitArtifact;
  }
  std::string run_dir;
  try {
    run_dir = resolve_run_dir(opt.out_dir, "eval-" + spec.id);
    cfg.out_dir = run_dir;
    save_resolved_config(cfg, run_dir + "/resolved_config.json");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitArtifact;
  }
  log << "run dir: " << run_dir << "\n";
  CohortResult all;
  all.summary.controller = spec.id;
  all.summary.master_seed = cfg.seed;
  all.summary.trials_per_level = cfg.cohort.trials;
  bool interrupted = false;
  for (int level : cfg.cohort.levels) {
    if (interrupt_requested()) {
      interrupted = true;
      break;
    }
    CohortResult part = run_cohort(spec.factory, spec.id, cfg.env, {level},
                                   cfg.cohort.trials, cfg.seed);
    const LevelSummary& s = part.summary.levels.front();
    log << "level " << level << ": settling " << settling_text(s.settling, s.not_settled)
        << ", rms " << format_g17(s.rms.mean) << " N m, peak "
        << format_g17(s.peak.mean) << " N m, sse " << format_g17(s.sse.mean)
        << " deg\n";
    all.summary.levels.push_back(s);
    all.trials.insert(all.trials.end(), part.trials.begin(),
                      part.trials.end());
  }
  try {
    write_trials_csv(all.trials, run_dir + "/trials.csv");
    write_summary_csv(all.summary, run_dir + "/summary.csv");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitArtifact;
  }
  if (interrupted) {
    log << "interrupted; partial artifacts kept\n";
    return kExitInterrupted;
  }
  return kExitOk;
}

int cmd_compare(const CompareOptions& opt, std::ostream& log) {
  CohortSummary a, b;
  Comparison cmp;
  try {
    a = read_summary_csv(opt.summary_a);
    b = read_summary_csv(opt.summary_b);
    cmp = compare(a, b);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitArtifact;
  }
  std::string run_dir;
  try {
    run_dir = resolve_run_dir(opt.out_dir, "compare");
    write_comparison_csv(cmp, run_dir + "/comparison.csv");
    const std::string table =
        format_comparison(cmp, a.controller, b.controller);
    std::ofstream txt(run_dir + "/comparison.txt");
    if (!txt) throw std::runtime_error("cannot open comparison.txt");
    txt << table;
    log << "run dir: " << run_dir << "\n" << table;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitArtifact;
  }
  return kExitOk;
}

int cmd_sweep(const SweepOptions& opt, std::ostream& log) {
  RunConfig cfg;
  try {
    cfg = load_or_default(opt.config_path);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.levels) cfg.cohort.levels = *opt.levels;
    if (opt.trials) cfg.cohort.trials = *opt.trials;
    validate_env(cfg.env);
    if (cfg.cohort.trials <= 0) throw ConfigError("--trials must be > 0");
    if (cfg.cohort.levels.empty()) throw ConfigError("no levels selected");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  ControllerSpec spec;
  try {
    spec = make_controller_spec(opt.checkpoint, opt.use_pid, cfg);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitArtifact;
  }
  std::string run_dir;
  try {
    run_dir = resolve_run_dir(opt.out_dir, "sweep-" + spec.id);
    cfg.out_dir = run_dir;
    save_resolved_config(cfg, run_dir + "/resolved_config.json");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitArtifact;
  }
  log << "run dir: " << run_dir << "\n";
  bool interrupted = false;
  for (int level : cfg.cohort.levels) {
    std::vector<EpisodeTrace> traces;
    for (int i = 0; i < cfg.cohort.trials && !interrupted; ++i) {
      if (interrupt_requested()) {
        interrupted = true;
        break;
      }
      const std::uint64_t seed = derive_seed(
          cfg.seed, (static_cast<std::uint64_t>(level) << 32) |
                        static_cast<std::uint64_t>(i));
      traces.push_back(run_episode(spec.factory(), cfg.env, level, seed));
    }
    if (traces.empty()) break;
    const std::size_t n_steps = traces.front().time.size();
    const std::string path =
        run_dir + "/sweep_level" + std::to_string(level) + ".csv";
    try {
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot open " + path);
      out << "t,theta_mean_deg,theta_std_deg,action_mean,action_std,"
             "tau_mean_nm,tau_std_nm\n";
      for (std::size_t j = 0; j < n_steps; ++j) {
        double th_s = 0.0, th_ss = 0.0, a_s = 0.0, a_ss = 0.0, tq_s = 0.0,
               tq_ss = 0.0;
        for (const EpisodeTrace& tr : traces) {
          const double th = rad_to_deg(tr.theta[j]);
          th_s += th;
          th_ss += th * th;
          a_s += tr.action[j];
          a_ss += tr.action[j] * tr.action[j];
          tq_s += tr.tau_int[j];
          tq_ss += tr.tau_int[j] * tr.tau_int[j];
        }
        const double n = static_cast<double>(traces.size());
        const auto stddev = [n](double s, double ss) {
          return std::sqrt(std::max(0.0, ss / n - (s / n) * (s / n)));
        };
        out << format_g17(traces.front().time[j]) << ','
            << format_g17(th_s / n) << ',' << format_g17(stddev(th_s, th_ss))
            << ',' << format_g17(a_s / n) << ','
            << format_g17(stddev(a_s, a_ss)) << ',' << format_g17(tq_s / n)
            << ',' << format_g17(stddev(tq_s, tq_ss)) << '\n';
      }
      if (!out) throw std::runtime_error("failed writing " + path);
    } catch (const std::exception& e) {
      log << "error: " << e.what() << "\n";
      return kExitArtifact;
    }
    log << "level " << level << ": " << traces.size() << " episodes -> "
        << path << "\n";
    if (interrupted) break;
  }
  if (interrupted) {
    log << "interrupted; partial artifacts kept\n";
    return kExitInterrupted;
  }
  return kExitOk;
}

}  // namespace exotwin
