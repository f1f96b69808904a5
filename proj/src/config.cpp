#include "exotwin/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

namespace exotwin {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError("config: '" + ctx + "' must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("config: unknown key '" + item.key() + "' in " + ctx);
  }
}

double get_num(const json& j, const char* key, double fallback,
               const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number())
    throw ConfigError("config: '" + ctx + "." + key + "' must be a number");
  return v.get<double>();
}

std::int64_t get_int(const json& j, const char* key, std::int64_t fallback,
                     const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer())
    throw ConfigError("config: '" + ctx + "." + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback,
                      const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() ||
      (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ConfigError("config: '" + ctx + "." + key +
                      "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string get_str(const json& j, const char* key, std::string fallback,
                    const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string())
    throw ConfigError("config: '" + ctx + "." + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<int> get_int_list(const json& j, const char* key,
                              std::vector<int> fallback,
                              const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array())
    throw ConfigError("config: '" + ctx + "." + key + "' must be an array");
  std::vector<int> out;
  for (const json& e : v) {
    if (!e.is_number_integer())
      throw ConfigError("config: '" + ctx + "." + key +
                        "' must hold integers");
    out.push_back(e.get<int>());
  }
  return out;
}

void parse_body(const json& j, BodyParams& b) {
  check_keys(j, "body",
             {"shank_mass_kg", "com_distance_m", "inertia_kgm2",
              "viscous_damping", "joint_stop_stiffness", "joint_stop_damping",
              "theta_min_deg", "theta_max_deg"});
  b.shank_mass = get_num(j, "shank_mass_kg", b.shank_mass, "body");
  b.com_distance = get_num(j, "com_distance_m", b.com_distance, "body");
  b.inertia_about_knee = get_num(j, "inertia_kgm2", b.inertia_about_knee,
                                 "body");
  b.viscous_damping = get_num(j, "viscous_damping", b.viscous_damping, "body");
  b.joint_stop_stiffness =
      get_num(j, "joint_stop_stiffness", b.joint_stop_stiffness, "body");
  b.joint_stop_damping =
      get_num(j, "joint_stop_damping", b.joint_stop_damping, "body");
  b.theta_min_deg = get_num(j, "theta_min_deg", b.theta_min_deg, "body");
  b.theta_max_deg = get_num(j, "theta_max_deg", b.theta_max_deg, "body");
}

void parse_coupling(const json& j, CouplingParams& c) {
  check_keys(j, "coupling",
             {"strap_stiffness", "strap_damping", "pin_range_deg",
              "pin_stop_stiffness", "slider_range_m", "slider_stiffness",
              "slider_damping", "slider_retention", "misalignment_lever_m",
              "exo_link_mass_kg", "exo_com_distance_m", "exo_link_inertia",
              "exo_theta_min_deg", "exo_theta_max_deg"});
  c.strap_stiffness = get_num(j, "strap_stiffness", c.strap_stiffness,
                              "coupling");
  c.strap_damping = get_num(j, "strap_damping", c.strap_damping, "coupling");
  c.pin_range_deg = get_num(j, "pin_range_deg", c.pin_range_deg, "coupling");
  c.pin_stop_stiffness =
      get_num(j, "pin_stop_stiffness", c.pin_stop_stiffness, "coupling");
  c.slider_range = get_num(j, "slider_range_m", c.slider_range, "coupling");
  c.slider_stiffness =
      get_num(j, "slider_stiffness", c.slider_stiffness, "coupling");
  c.slider_damping = get_num(j, "slider_damping", c.slider_damping,
                             "coupling");
  c.slider_retention =
      get_num(j, "slider_retention", c.slider_retention, "coupling");
  c.misalignment_lever =
      get_num(j, "misalignment_lever_m", c.misalignment_lever, "coupling");
  c.exo_link_mass = get_num(j, "exo_link_mass_kg", c.exo_link_mass,
                            "coupling");
  c.exo_com_distance =
      get_num(j, "exo_com_distance_m", c.exo_com_distance, "coupling");
  c.exo_link_inertia =
      get_num(j, "exo_link_inertia", c.exo_link_inertia, "coupling");
  c.exo_theta_min_deg =
      get_num(j, "exo_theta_min_deg", c.exo_theta_min_deg, "coupling");
  c.exo_theta_max_deg =
      get_num(j, "exo_theta_max_deg", c.exo_theta_max_deg, "coupling");
}

void parse_reward(const json& j, RewardConfig& r) {
  check_keys(j, "reward",
             {"sigma_sq", "tau_threshold_nm", "tau_norm_nm", "bonus",
              "bonus_pos_band_rad", "bonus_vel_band_rad", "w_pose", "w_inter",
              "w_vel", "w_act"});
  r.sigma_sq = get_num(j, "sigma_sq", r.sigma_sq, "reward");
  r.tau_threshold = get_num(j, "tau_threshold_nm", r.tau_threshold, "reward");
  r.tau_norm = get_num(j, "tau_norm_nm", r.tau_norm, "reward");
  r.bonus = get_num(j, "bonus", r.bonus, "reward");
  r.bonus_pos_band = get_num(j, "bonus_pos_band_rad", r.bonus_pos_band,
                             "reward");
  r.bonus_vel_band = get_num(j, "bonus_vel_band_rad", r.bonus_vel_band,
                             "reward");
  r.w_pose = get_num(j, "w_pose", r.w_pose, "reward");
  r.w_inter = get_num(j, "w_inter", r.w_inter, "reward");
  r.w_vel = get_num(j, "w_vel", r.w_vel, "reward");
  r.w_act = get_num(j, "w_act", r.w_act, "reward");
}

void parse_level_table(
    const json& j,
    std::array<SubjectParams, SpasticityLevel::kCount>& table) {
  if (!j.is_array())
    throw ConfigError("config: 'levels' must be an array");
  std::set<int> seen;
  for (const json& row : j) {
    check_keys(row, "levels[]",
               {"level", "theta_flex_deg", "theta_ext_deg", "v_lower",
                "v_upper", "s_theta_max", "s_v_max", "k_ang", "k_vel"});
    if (!row.contains("level"))
      throw ConfigError("config: each levels[] entry needs a 'level'");
    const int id = static_cast<int>(get_int(row, "level", 0, "levels[]"));
    if (id < 0 || id >= SpasticityLevel::kCount)
      throw ConfigError("config: levels[].level must be 0..3");
    if (!seen.insert(id).second)
      throw ConfigError("config: duplicate levels[] entry for level " +
                        std::to_string(id));
    SubjectParams& p = table[static_cast<std::size_t>(id)];
    const std::string ctx = "levels[" + std::to_string(id) + "]";
    p.theta_flex_deg = get_num(row, "theta_flex_deg", p.theta_flex_deg, ctx);
    p.theta_ext_deg = get_num(row, "theta_ext_deg", p.theta_ext_deg, ctx);
    p.v_lower = get_num(row, "v_lower", p.v_lower, ctx);
    p.v_upper = get_num(row, "v_upper", p.v_upper, ctx);
    p.s_theta_max = get_num(row, "s_theta_max", p.s_theta_max, ctx);
    p.s_v_max = get_num(row, "s_v_max", p.s_v_max, ctx);
    p.k_ang = get_num(row, "k_ang", p.k_ang, ctx);
    p.k_vel = get_num(row, "k_vel", p.k_vel, ctx);
  }
}

void parse_muscles(const json& j, MuscleSet& muscles) {
  if (!j.is_array())
    throw ConfigError("config: 'muscles' must be an array");
  std::set<std::string> seen;
  for (const json& row : j) {
    check_keys(row, "muscles[]",
               {"name", "f_max_n", "moment_arm_m", "optimal_fiber_length_m",
                "ref_angle_deg", "fl_width", "fv_max_shortening_velocity"});
    const std::string name = get_str(row, "name", "", "muscles[]");
    if (name.empty())
      throw ConfigError("config: each muscles[] entry needs a 'name'");
    if (!seen.insert(name).second)
      throw ConfigError("config: duplicate muscles[] entry '" + name + "'");
    MuscleParams* target = nullptr;
    for (MuscleParams& m : muscles)
      if (name == muscle_name(m.id)) {
        target = &m;
        break;
      }
    if (target == nullptr)
      throw ConfigError("config: unknown muscle '" + name + "'");
    const std::string ctx = "muscles[" + name + "]";
    target->f_max = get_num(row, "f_max_n", target->f_max, ctx);
    target->moment_arm = get_num(row, "moment_arm_m", target->moment_arm, ctx);
    target->optimal_fiber_length = get_num(
        row, "optimal_fiber_length_m", target->optimal_fiber_length, ctx);
    target->ref_angle_deg =
        get_num(row, "ref_angle_deg", target->ref_angle_deg, ctx);
    target->fl_width = get_num(row, "fl_width", target->fl_width, ctx);
    target->fv_max_shortening_velocity =
        get_num(row, "fv_max_shortening_velocity",
                target->fv_max_shortening_velocity, ctx);
  }
}

void parse_env(const json& j, EnvConfig& e) {
  check_keys(j, "env",
             {"start_angle_deg", "target_angle_deg", "episode_duration_s",
              "control_dt_s", "physics_dt_s", "levels",
              "subject_noise_frac"});
  e.start_angle_deg = get_num(j, "start_angle_deg", e.start_angle_deg, "env");
  e.target_angle_deg =
      get_num(j, "target_angle_deg", e.target_angle_deg, "env");
  e.episode_duration =
      get_num(j, "episode_duration_s", e.episode_duration, "env");
  e.control_dt = get_num(j, "control_dt_s", e.control_dt, "env");
  e.physics_dt = get_num(j, "physics_dt_s", e.physics_dt, "env");
  e.levels = get_int_list(j, "levels", e.levels, "env");
  e.subject_noise_frac =
      get_num(j, "subject_noise_frac", e.subject_noise_frac, "env");
}

void parse_sac(const json& j, SacHyperparams& s) {
  check_keys(j, "sac",
             {"buffer_capacity", "total_steps", "warmup_steps", "batch_size",
              "gamma", "tau", "adam_lr", "init_alpha", "target_entropy",
              "eval_interval", "eval_episodes", "hidden_width"});
  s.buffer_capacity = static_cast<std::size_t>(get_int(
      j, "buffer_capacity", static_cast<std::int64_t>(s.buffer_capacity),
      "sac"));
  s.total_steps = get_int(j, "total_steps", s.total_steps, "sac");
  s.warmup_steps = get_int(j, "warmup_steps", s.warmup_steps, "sac");
  s.batch_size =
      static_cast<int>(get_int(j, "batch_size", s.batch_size, "sac"));
  s.gamma = get_num(j, "gamma", s.gamma, "sac");
  s.tau = get_num(j, "tau", s.tau, "sac");
  s.adam_lr = get_num(j, "adam_lr", s.adam_lr, "sac");
  s.init_alpha = get_num(j, "init_alpha", s.init_alpha, "sac");
  s.target_entropy = get_num(j, "target_entropy", s.target_entropy, "sac");
  s.eval_interval = get_int(j, "eval_interval", s.eval_interval, "sac");
  s.eval_episodes =
      static_cast<int>(get_int(j, "eval_episodes", s.eval_episodes, "sac"));
  s.hidden_width =
      static_cast<int>(get_int(j, "hidden_width", s.hidden_width, "sac"));
}

void parse_pid(const json& j, PidGains& p) {
  check_keys(j, "pid", {"kp", "ki", "kd", "integral_limit_nm"});
  p.kp = get_num(j, "kp", p.kp, "pid");
  p.ki = get_num(j, "ki", p.ki, "pid");
  p.kd = get_num(j, "kd", p.kd, "pid");
  p.integral_limit = get_num(j, "integral_limit_nm", p.integral_limit, "pid");
}

void parse_cohort(const json& j, CohortConfig& c) {
  check_keys(j, "cohort", {"levels", "trials"});
  c.levels = get_int_list(j, "levels", c.levels, "cohort");
  c.trials = static_cast<int>(get_int(j, "trials", c.trials, "cohort"));
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse failure: ") + e.what());
  }
  check_keys(j, "top level",
             {"seed", "out_dir", "env", "body", "coupling", "reward",
              "levels", "muscles", "sac", "pid", "cohort"});
  RunConfig cfg;
  try {
    cfg.seed = get_u64(j, "seed", cfg.seed, "top level");
    cfg.out_dir = get_str(j, "out_dir", cfg.out_dir, "top level");
    if (j.contains("env")) parse_env(j.at("env"), cfg.env);
    if (j.contains("body")) parse_body(j.at("body"), cfg.env.body);
    if (j.contains("coupling"))
      parse_coupling(j.at("coupling"), cfg.env.coupling);
    if (j.contains("reward")) parse_reward(j.at("reward"), cfg.env.reward);
    if (j.contains("levels"))
      parse_level_table(j.at("levels"), cfg.env.level_table);
    if (j.contains("muscles")) parse_muscles(j.at("muscles"), cfg.env.muscles);
    if (j.contains("sac")) parse_sac(j.at("sac"), cfg.sac);
    if (j.contains("pid")) parse_pid(j.at("pid"), cfg.pid);
    if (j.contains("cohort")) parse_cohort(j.at("cohort"), cfg.cohort);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed value: ") + e.what());
  }
  try {
    validate_env(cfg.env);
    validate_sac(cfg.sac);
    validate_pid(cfg.pid);
    if (cfg.cohort.trials <= 0)
      throw std::invalid_argument("cohort.trials must be > 0");
    if (cfg.cohort.levels.empty())
      throw std::invalid_argument("cohort.levels must be non-empty");
    for (int lvl : cfg.cohort.levels) {
      SpasticityLevel checked{lvl};
      (void)checked;
    }
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (file " + path + ")");
  }
}

std::string resolved_config_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["env"] = {{"start_angle_deg", cfg.env.start_angle_deg},
              {"target_angle_deg", cfg.env.target_angle_deg},
              {"episode_duration_s", cfg.env.episode_duration},
              {"control_dt_s", cfg.env.control_dt},
              {"physics_dt_s", cfg.env.physics_dt},
              {"levels", cfg.env.levels},
              {"subject_noise_frac", cfg.env.subject_noise_frac}};
  const BodyParams& b = cfg.env.body;
  j["body"] = {{"shank_mass_kg", b.shank_mass},
               {"com_distance_m", b.com_distance},
               {"inertia_kgm2", b.inertia_about_knee},
               {"viscous_damping", b.viscous_damping},
               {"joint_stop_stiffness", b.joint_stop_stiffness},
               {"joint_stop_damping", b.joint_stop_damping},
               {"theta_min_deg", b.theta_min_deg},
               {"theta_max_deg", b.theta_max_deg}};
  const CouplingParams& c = cfg.env.coupling;
  j["coupling"] = {{"strap_stiffness", c.strap_stiffness},
                   {"strap_damping", c.strap_damping},
                   {"pin_range_deg", c.pin_range_deg},
                   {"pin_stop_stiffness", c.pin_stop_stiffness},
                   {"slider_range_m", c.slider_range},
                   {"slider_stiffness", c.slider_stiffness},
                   {"slider_damping", c.slider_damping},
                   {"slider_retention", c.slider_retention},
                   {"misalignment_lever_m", c.misalignment_lever},
                   {"exo_link_mass_kg", c.exo_link_mass},
                   {"exo_com_distance_m", c.exo_com_distance},
                   {"exo_link_inertia", c.exo_link_inertia},
                   {"exo_theta_min_deg", c.exo_theta_min_deg},
                   {"exo_theta_max_deg", c.exo_theta_max_deg}};
  const RewardConfig& r = cfg.env.reward;
  j["reward"] = {{"sigma_sq", r.sigma_sq},
                 {"tau_threshold_nm", r.tau_threshold},
                 {"tau_norm_nm", r.tau_norm},
                 {"bonus", r.bonus},
                 {"bonus_pos_band_rad", r.bonus_pos_band},
                 {"bonus_vel_band_rad", r.bonus_vel_band},
                 {"w_pose", r.w_pose},
                 {"w_inter", r.w_inter},
                 {"w_vel", r.w_vel},
                 {"w_act", r.w_act}};
  j["levels"] = json::array();
  for (const SubjectParams& p : cfg.env.level_table) {
    j["levels"].push_back({{"level", p.level.id()},
                           {"theta_flex_deg", p.theta_flex_deg},
                           {"theta_ext_deg", p.theta_ext_deg},
                           {"v_lower", p.v_lower},
                           {"v_upper", p.v_upper},
                           {"s_theta_max", p.s_theta_max},
                           {"s_v_max", p.s_v_max},
                           {"k_ang", p.k_ang},
                           {"k_vel", p.k_vel}});
  }
  j["muscles"] = json::array();
  for (const MuscleParams& m : cfg.env.muscles) {
    j["muscles"].push_back(
        {{"name", muscle_name(m.id)},
         {"f_max_n", m.f_max},
         {"moment_arm_m", m.moment_arm},
         {"optimal_fiber_length_m", m.optimal_fiber_length},
         {"ref_angle_deg", m.ref_angle_deg},
         {"fl_width", m.fl_width},
         {"fv_max_shortening_velocity", m.fv_max_shortening_velocity}});
  }
  j["sac"] = {{"buffer_capacity",
               static_cast<std::int64_t>(cfg.sac.buffer_capacity)},
              {"total_steps", cfg.sac.total_steps},
              {"warmup_steps", cfg.sac.warmup_steps},
              {"batch_size", cfg.sac.batch_size},
              {"gamma", cfg.sac.gamma},
              {"tau", cfg.sac.tau},
              {"adam_lr", cfg.sac.adam_lr},
              {"init_alpha", cfg.sac.init_alpha},
              {"target_entropy", cfg.sac.target_entropy},
              {"eval_interval", cfg.sac.eval_interval},
              {"eval_episodes", cfg.sac.eval_episodes},
              {"hidden_width", cfg.sac.hidden_width}};
  j["pid"] = {{"kp", cfg.pid.kp},
              {"ki", cfg.pid.ki},
              {"kd", cfg.pid.kd},
              {"integral_limit_nm", cfg.pid.integral_limit}};
  j["cohort"] = {{"levels", cfg.cohort.levels},
                 {"trials", cfg.cohort.trials}};
  return j.dump(2) + "\n";
}

void save_resolved_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open config file: " + path);
  out << resolved_config_json(cfg);
  if (!out) throw std::runtime_error("failed writing config file: " + path);
}

}  // namespace exotwin
