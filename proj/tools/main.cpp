#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exotwin/cli.hpp"

namespace {

struct Flags {
  std::string config, out, checkpoint;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  int level = 0;
  std::vector<int> levels;
  int trials = 0;
  bool pid = false;
};

}  // namespace

int main(int argc, char** argv) {
  exotwin::install_interrupt_handler();

  CLI::App app{
      "Digital twin of a spastic knee coupled to a torque-controlled "
      "exoskeleton: SAC training, cohort evaluation, comparison and trace "
      "sweeps"};
  app.require_subcommand(1);

  Flags tf, ef, cf, sf;
  std::string cmp_a, cmp_b;

  CLI::App* train = app.add_subcommand("train", "Train the SAC controller");
  train->add_option("--config", tf.config, "JSON config file");
  train->add_option("--seed", tf.seed, "master seed override");
  train->add_option("--steps", tf.steps, "total environment steps override");
  train->add_option("--level", tf.level, "train on a single severity level")
      ->check(CLI::Range(0, 3));
  train->add_option("--out", tf.out, "run directory (default: timestamped)");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a controller cohort");
  eval->add_option("--config", ef.config, "JSON config file");
  eval->add_option("--checkpoint", ef.checkpoint,
                   "SAC checkpoint to evaluate");
  eval->add_flag("--pid", ef.pid, "evaluate the PID baseline");
  eval->add_option("--seed", ef.seed, "master seed override");
  eval->add_option("--levels", ef.levels, "severity levels, e.g. 0,1,2,3")
      ->delimiter(',')
      ->check(CLI::Range(0, 3));
  eval->add_option("--trials", ef.trials, "trials per level");
  eval->add_option("--out", ef.out, "run directory (default: timestamped)");

  CLI::App* compare =
      app.add_subcommand("compare", "Compare two cohort summaries");
  compare->add_option("summary_a", cmp_a, "baseline summary.csv")->required();
  compare->add_option("summary_b", cmp_b, "candidate summary.csv")
      ->required();
  compare->add_option("--out", cf.out, "run directory (default: timestamped)");

  CLI::App* sweep =
      app.add_subcommand("sweep", "Export per-level mean trace bands");
  sweep->add_option("--config", sf.config, "JSON config file");
  sweep->add_option("--checkpoint", sf.checkpoint, "SAC checkpoint to run");
  sweep->add_flag("--pid", sf.pid, "sweep the PID baseline");
  sweep->add_option("--seed", sf.seed, "master seed override");
  sweep->add_option("--levels", sf.levels, "severity levels, e.g. 0,1,2,3")
      ->delimiter(',')
      ->check(CLI::Range(0, 3));
  sweep->add_option("--trials", sf.trials, "episodes per level");
  sweep->add_option("--out", sf.out, "run directory (default: timestamped)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exotwin::kExitConfig;
  }

  if (train->parsed()) {
    exotwin::TrainOptions opt;
    opt.config_path = tf.config;
    if (train->count("--seed") > 0) opt.seed = tf.seed;
    if (train->count("--steps") > 0) opt.steps = tf.steps;
    if (train->count("--level") > 0) opt.level = tf.level;
    opt.out_dir = tf.out;
    return exotwin::cmd_train(opt, std::cout);
  }
  if (eval->parsed()) {
    exotwin::EvalOptions opt;
    opt.config_path = ef.config;
    opt.checkpoint = ef.checkpoint;
    opt.use_pid = ef.pid;
    if (eval->count("--seed") > 0) opt.seed = ef.seed;
    if (eval->count("--levels") > 0) opt.levels = ef.levels;
    if (eval->count("--trials") > 0) opt.trials = ef.trials;
    opt.out_dir = ef.out;
    return exotwin::cmd_eval(opt, std::cout);
  }
  if (compare->parsed()) {
    exotwin::CompareOptions opt;
    opt.summary_a = cmp_a;
    opt.summary_b = cmp_b;
    opt.out_dir = cf.out;
    return exotwin::cmd_compare(opt, std::cout);
  }
  exotwin::SweepOptions opt;
  opt.config_path = sf.config;
  opt.checkpoint = sf.checkpoint;
  opt.use_pid = sf.pid;
  if (sweep->count("--seed") > 0) opt.seed = sf.seed;
  if (sweep->count("--levels") > 0) opt.levels = sf.levels;
  if (sweep->count("--trials") > 0) opt.trials = sf.trials;
  opt.out_dir = sf.out;
  return exotwin::cmd_sweep(opt, std::cout);
}
