#pragma once

// Structured run configuration: one JSON file covering environment, plant,
// reward, level table, muscles, SAC, PID and cohort settings. Loading is
// strict (unknown keys are errors); saving materializes every default so a
// run is reproducible from its emitted resolved config alone.

#include <stdexcept>
#include <string>

#include "exotwin/environment.hpp"
#include "exotwin/pid.hpp"
#include "exotwin/sac.hpp"

namespace exotwin {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CohortConfig {
  std::vector<int> levels = {0, 1, 2, 3};
  int trials = 1000;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir;  // empty: timestamped directory under the output root
  EnvConfig env;
  SacHyperparams sac;
  PidGains pid;
  CohortConfig cohort;
};

/// Parses and validates `text` (JSON). Unknown keys anywhere, wrong types
/// and invariant violations all raise ConfigError.
RunConfig parse_config(const std::string& text);

/// parse_config over the file contents; the path is quoted in errors.
RunConfig load_config(const std::string& path);

/// The full configuration as pretty-printed JSON with every field present.
std::string resolved_config_json(const RunConfig& cfg);

void save_resolved_config(const RunConfig& cfg, const std::string& path);

}  // namespace exotwin
