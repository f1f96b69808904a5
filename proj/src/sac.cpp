#include "exotwin/sac.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace exotwin {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 log(2 pi)
constexpr double kLog2 = 0.6931471805599453;

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct BatchMatrices {
  Matrix s;       // obs_dim x B
  Matrix s_next;  // obs_dim x B
  Vector action;
  Vector reward;
  Vector done;
};

BatchMatrices to_matrices(const std::vector<Transition>& batch) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  BatchMatrices m;
  m.s.resize(kObservationDim, B);
  m.s_next.resize(kObservationDim, B);
  m.action.resize(B);
  m.reward.resize(B);
  m.done.resize(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const Transition& t = batch[static_cast<std::size_t>(i)];
    for (int d = 0; d < kObservationDim; ++d) {
      m.s(d, i) = t.obs[static_cast<std::size_t>(d)];
      m.s_next(d, i) = t.next_obs[static_cast<std::size_t>(d)];
    }
    m.action(i) = t.action;
    m.reward(i) = t.reward;
    m.done(i) = t.done ? 1.0 : 0.0;
  }
  return m;
}

/// Squashed-Gaussian policy evaluated on a batch of observations with the
/// standard-normal draws supplied by the caller.
struct PolicyEval {
  Mlp::Cache cache;
  Eigen::RowVectorXd mean, log_std_raw, log_std, sigma, z, action, log_prob;
};

PolicyEval eval_policy(const Mlp& actor, const Matrix& obs,
                       const std::vector<double>& noise) {
  if (static_cast<Eigen::Index>(noise.size()) != obs.cols())
    throw std::invalid_argument("eval_policy: one noise draw per sample");
  PolicyEval p;
  const Matrix out = actor.forward(obs, p.cache);
  p.mean = out.row(0);
  p.log_std_raw = out.row(1);
  p.log_std = p.log_std_raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  p.sigma = p.log_std.array().exp();
  p.z.resize(obs.cols());
  p.action.resize(obs.cols());
  p.log_prob.resize(obs.cols());
  for (Eigen::Index i = 0; i < obs.cols(); ++i) {
    p.z(i) = p.mean(i) + p.sigma(i) * noise[static_cast<std::size_t>(i)];
    p.action(i) = std::tanh(p.z(i));
    p.log_prob(i) = squashed_log_prob(p.z(i), p.mean(i), p.log_std(i));
  }
  return p;
}

Matrix stack_state_action(const Matrix& s, const Eigen::RowVectorXd& a) {
  Matrix x(s.rows() + 1, s.cols());
  x.topRows(s.rows()) = s;
  x.row(s.rows()) = a;
  return x;
}

void scalar_adam(double& param, double grad, double& m, double& v,
                 std::int64_t& t, double lr) {
  constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
  t += 1;
  m = kB1 * m + (1.0 - kB1) * grad;
  v = kB2 * v + (1.0 - kB2) * grad * grad;
  const double mh = m / (1.0 - std::pow(kB1, static_cast<double>(t)));
  const double vh = v / (1.0 - std::pow(kB2, static_cast<double>(t)));
  param -= lr * mh / (std::sqrt(vh) + kEps);
}

}  // namespace

void validate_sac(const SacHyperparams& hp) {
  if (!(hp.tau > 0.0 && hp.tau <= 1.0))
    throw std::invalid_argument("sac: tau must be in (0, 1]");
  if (!(hp.gamma > 0.0 && hp.gamma < 1.0))
    throw std::invalid_argument("sac: gamma must be in (0, 1)");
  if (hp.batch_size <= 0)
    throw std::invalid_argument("sac: batch_size must be > 0");
  if (hp.buffer_capacity == 0)
    throw std::invalid_argument("sac: buffer_capacity must be > 0");
  if (!(hp.adam_lr > 0.0))
    throw std::invalid_argument("sac: adam_lr must be > 0");
  if (!(hp.init_alpha > 0.0))
    throw std::invalid_argument("sac: init_alpha must be > 0");
  if (hp.total_steps < 0 || hp.warmup_steps < 0)
    throw std::invalid_argument("sac: step counts must be >= 0");
  if (hp.eval_interval <= 0)
    throw std::invalid_argument("sac: eval_interval must be > 0");
  if (hp.eval_episodes <= 0)
    throw std::invalid_argument("sac: eval_episodes must be > 0");
  if (hp.hidden_width <= 0)
    throw std::invalid_argument("sac: hidden_width must be > 0");
}

double SacNetworks::alpha() const { return std::exp(log_alpha); }

SacNetworks make_networks(int obs_dim, const SacHyperparams& hp, Rng& rng) {
  SacNetworks nets;
  const int h = hp.hidden_width;
  nets.actor = Mlp({obs_dim, h, h, 2}, rng);
  nets.critic1 = Mlp({obs_dim + 1, h, h, 1}, rng);
  nets.critic2 = Mlp({obs_dim + 1, h, h, 1}, rng);
  nets.target1 = nets.critic1;
  nets.target2 = nets.critic2;
  nets.log_alpha = std::log(hp.init_alpha);
  return nets;
}

double squashed_log_prob(double z, double mean, double log_std) {
  const double sigma = std::exp(log_std);
  const double xi = (z - mean) / sigma;
  const double gauss = -0.5 * xi * xi - log_std - kHalfLog2Pi;
  const double correction = 2.0 * (kLog2 - z - softplus(-2.0 * z));
  return gauss - correction;
}

ActionSample sample_action(const Mlp& actor, const Observation& obs,
                           Rng& rng) {
  Matrix in(kObservationDim, 1);
  for (int d = 0; d < kObservationDim; ++d)
    in(d, 0) = obs[static_cast<std::size_t>(d)];
  const Matrix out = actor.forward(in);
  ActionSample s;
  s.mean = out(0, 0);
  s.log_std = std::clamp(out(1, 0), kLogStdMin, kLogStdMax);
  std::normal_distribution<double> unit(0.0, 1.0);
  s.noise = unit(rng);
  const double z = s.mean + std::exp(s.log_std) * s.noise;
  s.action = std::tanh(z);
  s.log_prob = squashed_log_prob(z, s.mean, s.log_std);
  return s;
}

double deterministic_action(const Mlp& actor, const Observation& obs) {
  Matrix in(kObservationDim, 1);
  for (int d = 0; d < kObservationDim; ++d)
    in(d, 0) = obs[static_cast<std::size_t>(d)];
  return std::tanh(actor.forward(in)(0, 0));
}

Vector compute_critic_targets(const SacNetworks& nets,
                              const std::vector<Transition>& batch,
                              const std::vector<double>& noise,
                              const SacHyperparams& hp) {
  if (batch.empty())
    throw std::invalid_argument("compute_critic_targets: empty batch");
  if (noise.size() != batch.size())
    throw std::invalid_argument(
        "compute_critic_targets: need one noise draw per transition");
  const BatchMatrices m = to_matrices(batch);
  PolicyEval next = eval_policy(nets.actor, m.s_next, noise);
  const Matrix x = stack_state_action(m.s_next, next.action);
  const Matrix q1 = nets.target1.forward(x);
  const Matrix q2 = nets.target2.forward(x);
  const double alpha = nets.alpha();
  Vector y(m.reward.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double qmin = std::min(q1(0, i), q2(0, i));
    y(i) = m.reward(i) +
           hp.gamma * (1.0 - m.done(i)) * (qmin - alpha * next.log_prob(i));
  }
  return y;
}

SacOptimizers make_optimizers(const SacNetworks& nets) {
  SacOptimizers opt;
  opt.actor = nets.actor.make_adam_state();
  opt.critic1 = nets.critic1.make_adam_state();
  opt.critic2 = nets.critic2.make_adam_state();
  return opt;
}

void soft_update(SacNetworks& nets, double tau) {
  nets.target1.soft_update_from(nets.critic1, tau);
  nets.target2.soft_update_from(nets.critic2, tau);
}

UpdateDiagnostics sac_update(SacNetworks& nets, SacOptimizers& opt,
                             const std::vector<Transition>& batch, Rng& rng,
                             const SacHyperparams& hp) {
  if (batch.empty()) throw std::invalid_argument("sac_update: empty batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  const double inv_b = 1.0 / static_cast<double>(B);

  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> noise_next(batch.size());
  for (double& n : noise_next) n = unit(rng);
  std::vector<double> noise_cur(batch.size());
  for (double& n : noise_cur) n = unit(rng);

  const Vector y = compute_critic_targets(nets, batch, noise_next, hp);
  const BatchMatrices m = to_matrices(batch);
  const Matrix x = stack_state_action(m.s, m.action.transpose());

  UpdateDiagnostics diag;
  double critic_loss_sum = 0.0;
  for (Mlp* critic : {&nets.critic1, &nets.critic2}) {
    Mlp::Cache cache;
    const Matrix q = critic->forward(x, cache);
    Eigen::RowVectorXd diff = q.row(0) - y.transpose();
    critic_loss_sum += diff.squaredNorm() * inv_b;
    MlpGrads grads = critic->make_grads();
    const Matrix dout = (2.0 * inv_b) * diff;
    critic->backward(cache, dout, grads);
    AdamState& state = critic == &nets.critic1 ? opt.critic1 : opt.critic2;
    critic->adam_step(grads, state, hp.adam_lr);
  }
  diag.critic_loss = 0.5 * critic_loss_sum;

  // Actor step against the freshly updated critics.
  PolicyEval pol = eval_policy(nets.actor, m.s, noise_cur);
  const Matrix xa = stack_state_action(m.s, pol.action);
  Mlp::Cache cq1, cq2;
  const Matrix q1 = nets.critic1.forward(xa, cq1);
  const Matrix q2 = nets.critic2.forward(xa, cq2);

  Eigen::RowVectorXd pick1(B), pick2(B), qmin(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const bool first = q1(0, i) <= q2(0, i);
    pick1(i) = first ? 1.0 : 0.0;
    pick2(i) = first ? 0.0 : 1.0;
    qmin(i) = first ? q1(0, i) : q2(0, i);
  }
  // Input gradients of the min-critic; the parameter gradients accumulated
  // here are discarded (the actor step must not touch the critics).
  MlpGrads scratch1 = nets.critic1.make_grads();
  MlpGrads scratch2 = nets.critic2.make_grads();
  const Matrix din1 = nets.critic1.backward(cq1, pick1, scratch1);
  const Matrix din2 = nets.critic2.backward(cq2, pick2, scratch2);
  const Eigen::RowVectorXd dq_da =
      din1.row(kObservationDim) + din2.row(kObservationDim);

  const double alpha = nets.alpha();
  Matrix dout_actor(2, B);
  double log_prob_sum = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const double t = pol.action(i);
    const double sech2 = 1.0 - t * t;
    const double sigma_xi =
        pol.sigma(i) * noise_cur[static_cast<std::size_t>(i)];
    dout_actor(0, i) = inv_b * (alpha * 2.0 * t - dq_da(i) * sech2);
    const bool pass = pol.log_std_raw(i) > kLogStdMin &&
                      pol.log_std_raw(i) < kLogStdMax;
    dout_actor(1, i) =
        pass ? inv_b * (alpha * (-1.0 + 2.0 * t * sigma_xi) -
                        dq_da(i) * sech2 * sigma_xi)
             : 0.0;
    log_prob_sum += pol.log_prob(i);
  }
  MlpGrads actor_grads = nets.actor.make_grads();
  nets.actor.backward(pol.cache, dout_actor, actor_grads);
  nets.actor.adam_step(actor_grads, opt.actor, hp.adam_lr);

  const double mean_log_prob = log_prob_sum * inv_b;
  diag.actor_loss = alpha * mean_log_prob - qmin.mean();
  diag.entropy = -mean_log_prob;

  const double alpha_grad = -(mean_log_prob + hp.target_entropy);
  scalar_adam(nets.log_alpha, alpha_grad, opt.alpha_m, opt.alpha_v,
              opt.alpha_t, hp.adam_lr);
  diag.alpha = nets.alpha();

  soft_update(nets, hp.tau);
  return diag;
}

void write_curve_csv(const std::vector<CurvePoint>& curve,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open curve file: " + path);
  out << "step,eval_return_mean,eval_return_std,alpha,critic_loss\n";
  char buf[256];
  for (const CurvePoint& pt : curve) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(pt.step), pt.eval_return_mean,
                  pt.eval_return_std, pt.alpha, pt.critic_loss);
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing curve file: " + path);
}

namespace {

void evaluate_policy(const Mlp& actor, const EnvConfig& cfg,
                     const SacHyperparams& hp, std::uint64_t master_seed,
                     CurvePoint& pt) {
  std::vector<double> returns;
  returns.reserve(static_cast<std::size_t>(hp.eval_episodes));
  Controller controller = [&actor](const Observation& obs) {
    return deterministic_action(actor, obs);
  };
  for (int i = 0; i < hp.eval_episodes; ++i) {
    const int level =
        cfg.levels[static_cast<std::size_t>(i) % cfg.levels.size()];
    const std::uint64_t seed =
        derive_seed(master_seed, 0xE7A10000ULL + static_cast<std::uint64_t>(i));
    const EpisodeTrace trace = run_episode(controller, cfg, level, seed);
    returns.push_back(trace.total_reward());
  }
  double sum = 0.0;
  for (double r : returns) sum += r;
  pt.eval_return_mean = sum / static_cast<double>(returns.size());
  double var = 0.0;
  for (double r : returns) {
    const double d = r - pt.eval_return_mean;
    var += d * d;
  }
  pt.eval_return_std = std::sqrt(var / static_cast<double>(returns.size()));
}

}  // namespace

TrainResult train(const EnvConfig& env_cfg, const SacHyperparams& hp,
                  std::uint64_t seed,
                  const std::function<bool()>& should_stop,
                  std::ostream* log) {
  validate_sac(hp);
  EnvConfig cfg = env_cfg;
  cfg.seed = derive_seed(seed, 1);
  Environment env(cfg);

  Rng net_rng = make_rng(derive_seed(seed, 2));
  Rng action_rng = make_rng(derive_seed(seed, 3));
  Rng sample_rng = make_rng(derive_seed(seed, 4));
  Rng update_rng = make_rng(derive_seed(seed, 5));

  SacNetworks nets = make_networks(kObservationDim, hp, net_rng);
  SacOptimizers opt = make_optimizers(nets);
  ReplayBuffer buffer(hp.buffer_capacity);

  TrainResult result;
  result.best = nets;
  result.best_return = -std::numeric_limits<double>::infinity();
  if (hp.total_steps == 0) {
    result.final_nets = nets;
    return result;
  }

  Observation obs = env.reset();
  std::uniform_real_distribution<double> uniform_action(-1.0, 1.0);
  double critic_loss_sum = 0.0;
  std::int64_t critic_loss_count = 0;
  bool evaluated = false;

  for (std::int64_t step = 1; step <= hp.total_steps; ++step) {
    if (should_stop && should_stop()) {
      result.interrupted = true;
      break;
    }
    double u;
    if (step <= hp.warmup_steps) {
      u = uniform_action(action_rng);
    } else {
      u = sample_action(nets.actor, obs, action_rng).action;
    }
    auto sr = env.step(ActuatorCommand{u});
    buffer.push(Transition{obs, u, sr.reward, sr.obs, sr.done});
    obs = sr.done ? env.reset() : sr.obs;

    if (step > hp.warmup_steps &&
        buffer.size() >= static_cast<std::size_t>(hp.batch_size)) {
      const auto batch = buffer.sample(
          static_cast<std::size_t>(hp.batch_size), sample_rng);
      const UpdateDiagnostics diag = sac_update(nets, opt, batch, update_rng,
                                                hp);
      critic_loss_sum += diag.critic_loss;
      ++critic_loss_count;
    }
    result.steps_run = step;

    if (step % hp.eval_interval == 0) {
      CurvePoint pt;
      pt.step = step;
      evaluate_policy(nets.actor, cfg, hp, seed, pt);
      pt.alpha = nets.alpha();
      pt.critic_loss = critic_loss_count > 0
                           ? critic_loss_sum /
                                 static_cast<double>(critic_loss_count)
                           : 0.0;
      critic_loss_sum = 0.0;
      critic_loss_count = 0;
      result.curve.push_back(pt);
      if (pt.eval_return_mean > result.best_return) {
        result.best = nets;
        result.best_return = pt.eval_return_mean;
        result.best_step = step;
      }
      evaluated = true;
      if (log != nullptr) {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "step %lld  eval_return %.2f +- %.2f  alpha %.4f  "
                      "critic_loss %.4g\n",
                      static_cast<long long>(pt.step), pt.eval_return_mean,
                      pt.eval_return_std, pt.alpha, pt.critic_loss);
        *log << buf << std::flush;
      }
    }
  }

  result.final_nets = nets;
  if (!evaluated) {
    result.best = nets;
    result.best_step = result.steps_run;
  }
  return result;
}

namespace {

// Checkpoint byte layout assumes a little-endian host (the only target of
// this artifact); offsets in error messages are absolute file positions.
class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_)
      throw std::runtime_error("cannot open checkpoint: " + path);
  }

  void read_bytes(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      fail(std::string("truncated while reading ") + what);
    offset_ += n;
  }

  std::uint32_t read_u32(const char* what) {
    std::uint32_t v = 0;
    read_bytes(&v, sizeof(v), what);
    return v;
  }

  float read_f32(const char* what) {
    float v = 0.0f;
    read_bytes(&v, sizeof(v), what);
    return v;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw std::runtime_error("checkpoint " + path_ + ": " + message +
                             " at byte " + std::to_string(offset_));
  }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

  std::size_t offset() const { return offset_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const SacNetworks& nets, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint: " + path);
  out.write(kCheckpointMagic, 7);
  const std::uint32_t fmt = kCheckpointFormatVersion;
  const std::uint32_t layout = kObservationLayoutVersion;
  out.write(reinterpret_cast<const char*>(&fmt), sizeof(fmt));
  out.write(reinterpret_cast<const char*>(&layout), sizeof(layout));
  const Mlp* nets_in_order[] = {&nets.actor, &nets.critic1, &nets.critic2,
                                &nets.target1, &nets.target2};
  const std::uint32_t count = 5;
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const Mlp* net : nets_in_order) {
    const std::uint32_t ndims = static_cast<std::uint32_t>(net->dims().size());
    out.write(reinterpret_cast<const char*>(&ndims), sizeof(ndims));
    for (int d : net->dims()) {
      const std::uint32_t dim = static_cast<std::uint32_t>(d);
      out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    }
  }
  std::vector<float> params;
  for (const Mlp* net : nets_in_order) net->append_params(params);
  params.push_back(static_cast<float>(nets.log_alpha));
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(float)));
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

SacNetworks load_checkpoint(const std::string& path) {
  CheckpointReader r(path);
  char magic[7];
  r.read_bytes(magic, 7, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 7) != 0)
    throw std::runtime_error("checkpoint " + path +
                             ": bad magic at byte 0 (not a checkpoint file)");
  const std::uint32_t fmt = r.read_u32("format version");
  if (fmt != kCheckpointFormatVersion)
    r.fail("unsupported format version " + std::to_string(fmt));
  const std::uint32_t layout = r.read_u32("observation-layout version");
  if (layout != kObservationLayoutVersion)
    r.fail("observation layout version " + std::to_string(layout) +
           " does not match this build (" +
           std::to_string(kObservationLayoutVersion) + ")");
  const std::uint32_t count = r.read_u32("network count");
  if (count != 5) r.fail("expected 5 networks, found " + std::to_string(count));

  std::vector<std::vector<int>> dims(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    const std::uint32_t ndims = r.read_u32("dimension count");
    if (ndims < 2 || ndims > 64) r.fail("implausible dimension count");
    for (std::uint32_t d = 0; d < ndims; ++d) {
      const std::uint32_t dim = r.read_u32("dimension");
      if (dim == 0 || dim > 1u << 20) r.fail("implausible dimension");
      dims[n].push_back(static_cast<int>(dim));
    }
  }
  if (dims[0].front() != kObservationDim || dims[0].back() != 2)
    r.fail("actor dimensions do not fit the observation layout");
  for (int n = 1; n < 5; ++n) {
    if (dims[static_cast<std::size_t>(n)].front() != kObservationDim + 1 ||
        dims[static_cast<std::size_t>(n)].back() != 1)
      r.fail("critic dimensions do not fit the observation layout");
  }

  SacNetworks nets;
  Mlp* nets_in_order[] = {&nets.actor, &nets.critic1, &nets.critic2,
                          &nets.target1, &nets.target2};
  for (std::size_t n = 0; n < 5; ++n) {
    Mlp net{dims[n]};
    std::vector<float> params(net.parameter_count());
    r.read_bytes(params.data(), params.size() * sizeof(float), "parameters");
    net.load_params(params.data(), params.size());
    *nets_in_order[n] = std::move(net);
  }
  nets.log_alpha = static_cast<double>(r.read_f32("log_alpha"));
  if (!r.at_eof()) r.fail("trailing bytes after checkpoint payload");
  return nets;
}

}  // namespace exotwin
