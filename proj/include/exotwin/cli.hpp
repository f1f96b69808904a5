#pragma once

// Subcommand bodies behind the exotwin binary. Each is a plain function over
// an option struct so tests drive them without spawning processes; the
// binary only parses flags and dispatches.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace exotwin {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;    // unusable configuration or flag set
constexpr int kExitArtifact = 3;  // unreadable or inconsistent input artifact
constexpr int kExitInterrupted = 130;

/// Run directory for one invocation: `requested` verbatim when non-empty,
/// otherwise <root>/<timestamp>-<name> where the root comes from
/// EXOTWIN_OUT_ROOT (default "runs"). Created on return, suffixed -1, -2,
/// ... when the timestamped name already exists.
std::string resolve_run_dir(const std::string& requested,
                            const std::string& name);

/// SIGINT sets a flag that the long-running commands poll; they then stop,
/// persist whatever partial state exists and exit with kExitInterrupted.
void install_interrupt_handler();
bool interrupt_requested();
void clear_interrupt();

struct TrainOptions {
  std::string config_path;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<int> level;  // restrict training to a single severity level
  std::string out_dir;
};

/// Trains SAC and writes resolved_config.json, curve.csv, best.ckpt and
/// final.ckpt into the run directory.
int cmd_train(const TrainOptions& opt, std::ostream& log);

struct EvalOptions {
  std::string config_path;
  std::string checkpoint;  // exactly one of checkpoint / use_pid
  bool use_pid = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<int>> levels;
  std::optional<int> trials;
  std::string out_dir;
};

/// Runs the trial cohort and writes resolved_config.json, trials.csv and
/// summary.csv.
int cmd_eval(const EvalOptions& opt, std::ostream& log);

struct CompareOptions {
  std::string summary_a;  // baseline cohort summary CSV
  std::string summary_b;  // candidate cohort summary CSV
  std::string out_dir;
};

/// Writes comparison.csv plus a human-readable comparison.txt and prints the
/// table.
int cmd_compare(const CompareOptions& opt, std::ostream& log);

struct SweepOptions {
  std::string config_path;
  std::string checkpoint;
  bool use_pid = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<int>> levels;
  std::optional<int> trials;  // episodes averaged per level
  std::string out_dir;
};

/// Per level, averages `trials` episodes into a mean +- std trace band and
/// writes sweep_level<k>.csv next to resolved_config.json.
int cmd_sweep(const SweepOptions& opt, std::ostream& log);

}  // namespace exotwin
