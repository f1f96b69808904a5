#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <memory>
#include <optional>
#include <vector>

#include "exotwin/config.hpp"
#include "exotwin/environment.hpp"
#include "exotwin/evaluation.hpp"
#include "exotwin/pid.hpp"
#include "exotwin/rng.hpp"
#include "exotwin/sac.hpp"
#include "exotwin/spasticity.hpp"

namespace py = pybind11;

namespace exotwin {
namespace {

EnvConfig env_config(const std::string& config_json, std::uint64_t seed) {
  EnvConfig cfg =
      config_json.empty() ? EnvConfig{} : parse_config(config_json).env;
  cfg.seed = seed;
  return cfg;
}

py::array_t<double> to_array(const double* data, std::size_t n) {
  const std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(n)};
  return py::array_t<double>(shape, data);
}

py::dict trace_dict(const EpisodeTrace& trace) {
  auto vec = [](const std::vector<double>& v) {
    return to_array(v.data(), v.size());
  };
  py::dict d;
  d["level"] = trace.level;
  d["seed"] = trace.seed;
  d["time"] = vec(trace.time);
  d["theta"] = vec(trace.theta);
  d["omega"] = vec(trace.omega);
  d["action"] = vec(trace.action);
  d["tau_int"] = vec(trace.tau_int);
  d["reward"] = vec(trace.reward);
  d["total_reward"] = trace.total_reward();
  return d;
}

py::dict info_dict(const StepInfo& info) {
  py::dict d;
  d["time"] = info.time;
  d["interaction_torque"] = info.interaction_torque;
  d["strap_torque"] = info.strap_torque;
  d["misalignment_torque"] = info.misalignment_torque;
  d["spastic_torque"] = info.spastic_torque;
  d["level"] = info.level;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Digital twin of a spastic knee coupled to a torque-controlled "
      "exoskeleton";

  m.attr("OBSERVATION_DIM") = kObservationDim;
  m.attr("OBSERVATION_LAYOUT_VERSION") = kObservationLayoutVersion;

  py::class_<SubjectParams>(m, "SubjectParams")
      .def_property_readonly(
          "level", [](const SubjectParams& p) { return p.level.id(); })
      .def_readwrite("theta_flex_deg", &SubjectParams::theta_flex_deg)
      .def_readwrite("theta_ext_deg", &SubjectParams::theta_ext_deg)
      .def_readwrite("v_lower", &SubjectParams::v_lower)
      .def_readwrite("v_upper", &SubjectParams::v_upper)
      .def_readwrite("s_theta_max", &SubjectParams::s_theta_max)
      .def_readwrite("s_v_max", &SubjectParams::s_v_max)
      .def_readwrite("k_ang", &SubjectParams::k_ang)
      .def_readwrite("k_vel", &SubjectParams::k_vel)
      .def("__repr__", [](const SubjectParams& p) {
        return "SubjectParams(level=" + std::to_string(p.level.id()) + ")";
      });

  m.def(
      "default_subject",
      [](int level) { return canonical_params(SpasticityLevel(level)); },
      py::arg("level"), "Canonical severity-level parameters, levels 0-3.");
  m.def(
      "sample_subject",
      [](int level, std::uint64_t seed, double noise_frac) {
        return sample_subject(SpasticityLevel(level), seed, noise_frac);
      },
      py::arg("level"), py::arg("seed"), py::arg("noise_frac") = 0.10,
      "A randomized individual around the canonical level parameters.");

  m.def("sc_angular", &sc_angular, py::arg("theta_deg"), py::arg("subject"));
  m.def("sc_velocity", &sc_velocity, py::arg("v"), py::arg("subject"));
  m.def("sc_total", &sc_total, py::arg("theta_deg"), py::arg("v"),
        py::arg("subject"));
  m.def(
      "spastic_activations",
      [](double theta_deg, double v, double omega_sign,
         const SubjectParams& p) {
        return spastic_activations(theta_deg, v, omega_sign, p);
      },
      py::arg("theta_deg"), py::arg("v"), py::arg("omega_sign"),
      py::arg("subject"),
      "Per-muscle reflex activations in canonical muscle order.");

  py::class_<PidController>(m, "PidController")
      .def(py::init([](double kp, double ki, double kd, double control_dt) {
             PidGains g;
             g.kp = kp;
             g.ki = ki;
             g.kd = kd;
             return PidController(g, control_dt);
           }),
           py::arg("kp") = PidGains{}.kp, py::arg("ki") = PidGains{}.ki,
           py::arg("kd") = PidGains{}.kd, py::arg("control_dt") = 0.01)
      .def("reset", &PidController::reset)
      .def("action", &PidController::action, py::arg("error"), py::arg("dt"));

  py::class_<Environment>(m, "Environment")
      .def(py::init([](const std::string& config_json, std::uint64_t seed) {
             return Environment(env_config(config_json, seed));
           }),
           py::arg("config_json") = std::string(), py::arg("seed") = 0)
      .def(
          "reset",
          [](Environment& env, std::optional<int> level,
             std::optional<std::uint64_t> seed) {
            const Observation obs = env.reset(level, seed);
            return to_array(obs.data(), obs.size());
          },
          py::arg("level") = std::nullopt, py::arg("seed") = std::nullopt)
      .def(
          "step",
          [](Environment& env, double u) {
            const Environment::StepResult r = env.step(ActuatorCommand(u));
            return py::make_tuple(to_array(r.obs.data(), r.obs.size()),
                                  r.reward, r.done, info_dict(r.info));
          },
          py::arg("action"), "Returns (obs, reward, done, info).")
      .def("observation",
           [](const Environment& env) {
             const Observation obs = env.observation();
             return to_array(obs.data(), obs.size());
           })
      .def_property_readonly("subject", &Environment::subject)
      .def_property_readonly("time", &Environment::time)
      .def_property_readonly("done", &Environment::done)
      .def_property_readonly("steps_per_episode",
                             &Environment::steps_per_episode)
      .def_property_readonly("target_angle", &Environment::target_angle);

  m.def(
      "run_pid_episode",
      [](int level, std::uint64_t seed, const std::string& config_json) {
        const RunConfig run =
            config_json.empty() ? RunConfig{} : parse_config(config_json);
        PidController pid(run.pid, run.env.control_dt);
        return trace_dict(run_episode(pid, run.env, level, seed));
      },
      py::arg("level"), py::arg("seed"),
      py::arg("config_json") = std::string(),
      "One full episode under the PID baseline; returns the trace arrays.");

  m.def(
      "run_policy_episode",
      [](const std::string& checkpoint, int level, std::uint64_t seed,
         const std::string& config_json) {
        const EnvConfig cfg =
            config_json.empty() ? EnvConfig{} : parse_config(config_json).env;
        auto nets = std::make_shared<SacNetworks>(load_checkpoint(checkpoint));
        const Controller policy = [nets](const Observation& obs) {
          return deterministic_action(nets->actor, obs);
        };
        return trace_dict(run_episode(policy, cfg, level, seed));
      },
      py::arg("checkpoint"), py::arg("level"), py::arg("seed"),
      py::arg("config_json") = std::string(),
      "One full episode under the deterministic policy of a checkpoint.");

  m.def(
      "write_untrained_checkpoint",
      [](const std::string& path, std::uint64_t seed) {
        Rng rng = make_rng(seed);
        const SacNetworks nets =
            make_networks(kObservationDim, SacHyperparams{}, rng);
        save_checkpoint(nets, path);
      },
      py::arg("path"), py::arg("seed"),
      "Freshly initialized networks, for round-trip and rollout smoke "
      "tests.");

  m.def(
      "settling_time",
      [](const std::vector<double>& theta,
         double dt) -> std::optional<double> {
        return settling_time(theta, dt);
      },
      py::arg("theta"), py::arg("dt"),
      "Settling time of a knee-angle trace, None when it never settles.");
  m.def(
      "rms_to_settling",
      [](const std::vector<double>& torque, double dt,
         std::optional<double> settling) {
        return rms_to_settling(torque, dt, settling);
      },
      py::arg("torque"), py::arg("dt"), py::arg("settling") = std::nullopt);
  m.def(
      "peak_torque",
      [](const std::vector<double>& torque) { return peak_torque(torque); },
      py::arg("torque"));
}

}  // namespace exotwin
