#include "dypol/sysid/estimator.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dypol/diffnum/checkpoint.hpp"
#include "json.hpp"

namespace dypol::sysid {

using core::Chunk;
using core::DiagGaussian;
using diffnum::ParamStore;
using diffnum::Tape;

namespace {
constexpr double kPrecisionFloor = 1e-6;
constexpr double kStdFloor = 1e-4;
// Raw dynamics are floored at this fraction of base before entering the
// forward model, keeping F well-defined for early wide posteriors.
constexpr double kEtaSafetyFrac = 0.02;

double softplus_inverse(double y) {
  // inverse of log1p(exp(x)); y must be > 0
  return y > 30.0 ? y : std::log(std::expm1(y));
}
}  // namespace

PosteriorEstimate aggregate(const std::vector<DiagGaussian>& elementals,
                            const PriorParams& prior) {
  if (elementals.empty()) {
    throw std::invalid_argument("aggregate: no elemental posteriors (k=0)");
  }
  const std::size_t d = elementals.front().dim();
  PosteriorEstimate out;
  out.k_used = static_cast<int>(elementals.size());
  if (elementals.size() == 1) {
    out.posterior = elementals.front();
    return out;
  }
  if (prior.f0.size() != d || prior.g0.size() != d) {
    throw std::invalid_argument("aggregate: prior dimension mismatch");
  }
  const double k1 = static_cast<double>(elementals.size()) - 1.0;
  out.posterior.mean.resize(d);
  out.posterior.std.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    double prec_sum = 0.0;
    double weighted = 0.0;
    for (const DiagGaussian& e : elementals) {
      const double p = 1.0 / (e.std[j] * e.std[j]);
      prec_sum += p;
      weighted += e.mean[j] * p;
    }
    const double prior_prec = 1.0 / (prior.g0[j] * prior.g0[j]);
    double prec = prec_sum - k1 * prior_prec;
    if (prec < kPrecisionFloor) {
      prec = kPrecisionFloor;
      out.clamped_dims.push_back(static_cast<int>(j));
    }
    const double var = 1.0 / prec;
    out.posterior.mean[j] = var * (weighted - k1 * prior.f0[j] * prior_prec);
    out.posterior.std[j] = std::sqrt(var);
  }
  return out;
}

Vec reparam_sample(const DiagGaussian& posterior, const Vec& eps) {
  if (eps.size() != posterior.dim()) {
    throw std::invalid_argument("reparam_sample: eps dimension mismatch");
  }
  Vec out(posterior.dim());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = posterior.mean[j] + posterior.std[j] * eps[j];
  }
  return out;
}

double kl_to_prior(const DiagGaussian& posterior, const PriorParams& prior) {
  double kl = 0.0;
  for (std::size_t j = 0; j < posterior.dim(); ++j) {
    const double diff = posterior.mean[j] - prior.f0[j];
    const double s2 = posterior.std[j] * posterior.std[j];
    const double g2 = prior.g0[j] * prior.g0[j];
    kl += (diff * diff + s2) / (2.0 * g2) +
          std::log(prior.g0[j] / posterior.std[j]) - 0.5;
  }
  return kl;
}

EstimatorModel EstimatorModel::create(const envs::EnvSpec& env, int T,
                                      const std::vector<int>& hidden,
                                      bool noise_mode, double v,
                                      bool train_prior) {
  const envs::FamilyInfo& info = envs::family_info(env.family);
  EstimatorModel m;
  m.family = env.family;
  m.base = env.dynamics.base;
  m.obs_dim = info.obs_dim;
  m.act_dim = info.act_dim;
  m.T = T;
  m.noise_mode = noise_mode;
  if (noise_mode) {
    if (!env.motor) {
      throw std::invalid_argument("EstimatorModel: noise mode needs a motor block");
    }
    m.tau_seed = env.motor->tau_seed;
    m.d_phi = env.motor->d_phi;
    m.K = env.motor->K;
    m.n_omega = info.act_dim * env.motor->d_phi;
  }
  m.dt = env.dt;
  m.v = v;
  m.train_prior = train_prior;

  m.elemental.widths.push_back(m.chunk_input_dim());
  for (int h : hidden) m.elemental.widths.push_back(h);
  m.elemental.widths.push_back(2 * m.target_dim());
  m.elemental.output = diffnum::OutputTransform::kSoftplusTail;
  m.elemental.tail_len = m.target_dim();
  m.elemental.tail_floor = kStdFloor;
  return m;
}

void EstimatorModel::init_params(ParamStore& params, core::SeededRng& rng,
                                 double f0_init, double g0_init) const {
  diffnum::mlp_init(params, elemental, "elemental", rng);
  params.add("prior.f0", {target_dim()});
  params.add("prior.g0_raw", {target_dim()});
  auto f0 = params.values("prior.f0");
  for (double& x : f0) x = f0_init;
  auto g0 = params.values("prior.g0_raw");
  for (double& x : g0) x = softplus_inverse(g0_init - kStdFloor);
}

PriorParams EstimatorModel::prior(const ParamStore& params) const {
  PriorParams p;
  auto f0 = params.values("prior.f0");
  p.f0.assign(f0.begin(), f0.end());
  auto raw = params.values("prior.g0_raw");
  p.g0.resize(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    const double x = raw[j];
    p.g0[j] = (x > 30.0 ? x : std::log1p(std::exp(x))) + kStdFloor;
  }
  return p;
}

Vec EstimatorModel::chunk_input(const Chunk& chunk) const {
  if (chunk.T != T) {
    throw std::invalid_argument("elemental estimator: chunk length " +
                                std::to_string(chunk.T) + " != configured T " +
                                std::to_string(T));
  }
  Vec in;
  in.reserve(chunk.x.size() + chunk.y.size());
  in.insert(in.end(), chunk.x.begin(), chunk.x.end());
  in.insert(in.end(), chunk.y.begin(), chunk.y.end());
  return in;
}

DiagGaussian EstimatorModel::elemental_posterior(const ParamStore& params,
                                                 const Chunk& chunk) const {
  const Vec in = chunk_input(chunk);
  Vec out = diffnum::mlp_eval(elemental, params, in, "elemental");
  DiagGaussian g;
  g.mean.assign(out.begin(), out.begin() + target_dim());
  g.std.assign(out.begin() + target_dim(), out.end());
  return g;
}

PosteriorEstimate EstimatorModel::estimate(
    const ParamStore& params, const std::vector<core::Episode>& episodes) const {
  std::vector<DiagGaussian> elementals;
  for (const core::Episode& ep : episodes) {
    for (const Chunk& c : core::chunk_episode(ep, T)) {
      elementals.push_back(elemental_posterior(params, c));
    }
  }
  if (elementals.empty()) {
    throw std::runtime_error(
        "estimate: no complete chunk of length T=" + std::to_string(T) +
        "; collect more off-policy data");
  }
  return aggregate(elementals, prior(params));
}

PosteriorEstimate EstimatorModel::estimate_raw(
    const ParamStore& params, const std::vector<core::Episode>& episodes) const {
  PosteriorEstimate est = estimate(params, episodes);
  for (int j = 0; j < dyn_dim(); ++j) {
    const double b = base[static_cast<std::size_t>(j)];
    est.posterior.mean[static_cast<std::size_t>(j)] =
        b * (1.0 + est.posterior.mean[static_cast<std::size_t>(j)]);
    est.posterior.std[static_cast<std::size_t>(j)] *= b;
  }
  return est;
}

PreparedDataset prepare_dataset(const EstimatorModel& model,
                                const std::vector<Chunk>& chunks) {
  PreparedDataset data;
  data.chunks = chunks;
  envs::EnvSpec env = envs::make_default_spec(model.family);
  env.dt = model.dt;
  const int od = model.obs_dim;
  const int ad = model.act_dim;
  for (const Chunk& c : chunks) {
    for (int t = 0; t < c.T; ++t) {
      const double* xrow = c.x.data() + static_cast<std::size_t>(t) * (od + ad);
      Vec obs(xrow, xrow + od);
      Vec act(xrow + od, xrow + od + ad);
      Vec next(c.y.data() + static_cast<std::size_t>(t) * od,
               c.y.data() + static_cast<std::size_t>(t + 1) * od);
      data.act_clipped.push_back(envs::clip_action(env, act));
      if (model.noise_mode) {
        data.phi.push_back(envs::motor_phi(model.tau_seed, model.d_phi, obs));
      }
      data.obs.push_back(std::move(obs));
      data.next_obs.push_back(std::move(next));
    }
  }
  return data;
}

namespace {

// Sum of squared one-step prediction errors as a function of the sampled
// normalized target vector (dynamics [+ omega]); analytic Jacobians of the
// integrator provide the backward pass.
Tape::NodeId env_sse_node(Tape& tape, const EstimatorModel& model,
                          const PreparedDataset& data, Tape::NodeId eta_hat) {
  const int d = model.dyn_dim();
  const int n_omega = model.n_omega;
  envs::EnvSpec env = envs::make_default_spec(model.family);
  env.dt = model.dt;
  const Vec base = model.base;
  const double K = model.K;
  const int d_phi = model.d_phi;
  const int act_dim = model.act_dim;
  const PreparedDataset* dp = &data;
  const EstimatorModel* mp = &model;

  auto to_raw = [base, d](const Vec& x, std::vector<bool>* clamped) {
    Vec raw(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      const double pre = base[static_cast<std::size_t>(j)] *
                         (1.0 + x[static_cast<std::size_t>(j)]);
      const double lo = kEtaSafetyFrac * base[static_cast<std::size_t>(j)];
      raw[static_cast<std::size_t>(j)] = pre < lo ? lo : pre;
      if (clamped) (*clamped)[static_cast<std::size_t>(j)] = pre < lo;
    }
    return raw;
  };

  auto exec_action = [dp, mp, K, d_phi, act_dim, d](const Vec& x, std::size_t tr) {
    Vec a = dp->act_clipped[tr];
    if (mp->noise_mode) {
      const Vec& phi = dp->phi[tr];
      for (int i = 0; i < act_dim; ++i) {
        double acc = 0.0;
        for (int j = 0; j < d_phi; ++j) {
          acc += x[static_cast<std::size_t>(d + i * d_phi + j)] *
                 phi[static_cast<std::size_t>(j)];
        }
        a[static_cast<std::size_t>(i)] += K * acc;
      }
    }
    return a;
  };

  auto fwd = [env, dp, to_raw, exec_action](const std::vector<const Vec*>& in) {
    const Vec& x = *in[0];
    const Vec raw = to_raw(x, nullptr);
    double sse = 0.0;
    for (std::size_t tr = 0; tr < dp->obs.size(); ++tr) {
      const Vec pred = envs::step_core(env, dp->obs[tr], exec_action(x, tr), raw);
      for (std::size_t k = 0; k < pred.size(); ++k) {
        const double r = dp->next_obs[tr][k] - pred[k];
        sse += r * r;
      }
    }
    return Vec{sse};
  };

  auto bwd = [env, dp, mp, base, K, d_phi, act_dim, d, n_omega, to_raw,
              exec_action](const Vec& out_grad, const std::vector<const Vec*>& in,
                           const std::vector<Vec*>& grads) {
    const Vec& x = *in[0];
    std::vector<bool> clamped(static_cast<std::size_t>(d), false);
    const Vec raw = to_raw(x, &clamped);
    Vec g(static_cast<std::size_t>(d + n_omega), 0.0);
    Vec pred, jac_eta, jac_act;
    for (std::size_t tr = 0; tr < dp->obs.size(); ++tr) {
      const Vec a_exec = exec_action(x, tr);
      envs::step_core_jacobians(env, dp->obs[tr], a_exec, raw, &pred, &jac_eta,
                                mp->noise_mode ? &jac_act : nullptr);
      const std::size_t od = pred.size();
      for (std::size_t k = 0; k < od; ++k) {
        const double coeff = -2.0 * (dp->next_obs[tr][k] - pred[k]);
        for (int j = 0; j < d; ++j) {
          if (!clamped[static_cast<std::size_t>(j)]) {
            g[static_cast<std::size_t>(j)] +=
                coeff * jac_eta[k * static_cast<std::size_t>(d) +
                                static_cast<std::size_t>(j)] *
                base[static_cast<std::size_t>(j)];
          }
        }
        if (mp->noise_mode) {
          const Vec& phi = dp->phi[tr];
          for (int i = 0; i < act_dim; ++i) {
            const double da = coeff * jac_act[k * static_cast<std::size_t>(act_dim) +
                                              static_cast<std::size_t>(i)] * K;
            for (int j = 0; j < d_phi; ++j) {
              g[static_cast<std::size_t>(d + i * d_phi + j)] +=
                  da * phi[static_cast<std::size_t>(j)];
            }
          }
        }
      }
    }
    for (std::size_t j = 0; j < g.size(); ++j) {
      (*grads[0])[j] += out_grad[0] * g[j];
    }
  };

  return tape.custom({eta_hat}, fwd, bwd);
}

struct AggregateNodes {
  Tape::NodeId mean;
  Tape::NodeId std;
  Tape::NodeId var;
  Tape::NodeId f0;
  Tape::NodeId g0;
};

AggregateNodes aggregate_nodes(Tape& tape, const EstimatorModel& model,
                               const std::vector<Tape::NodeId>& mu,
                               const std::vector<Tape::NodeId>& sigma) {
  AggregateNodes out;
  out.f0 = tape.param("prior.f0");
  out.g0 = tape.add_const(tape.softplus(tape.param("prior.g0_raw")), kStdFloor);

  const double k1 = static_cast<double>(mu.size()) - 1.0;
  Tape::NodeId prec_sum = -1;
  Tape::NodeId weighted = -1;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    Tape::NodeId prec_i = tape.recip(tape.square(sigma[i]));
    prec_sum = prec_sum < 0 ? prec_i : tape.add(prec_sum, prec_i);
    Tape::NodeId w_i = tape.mul(mu[i], prec_i);
    weighted = weighted < 0 ? w_i : tape.add(weighted, w_i);
  }
  Tape::NodeId prior_prec = tape.recip(tape.square(out.g0));
  Tape::NodeId prec = tape.clamp_min(
      tape.sub(prec_sum, tape.scale(prior_prec, k1)), kPrecisionFloor);
  out.var = tape.recip(prec);
  Tape::NodeId num =
      tape.sub(weighted, tape.scale(tape.mul(out.f0, prior_prec), k1));
  out.mean = tape.mul(out.var, num);
  out.std = tape.sqrt_op(out.var);
  (void)model;
  return out;
}

Tape::NodeId kl_node(Tape& tape, const AggregateNodes& agg) {
  Tape::NodeId diff2 = tape.square(tape.sub(agg.mean, agg.f0));
  Tape::NodeId g0_sq = tape.square(agg.g0);
  Tape::NodeId term1 =
      tape.scale(tape.mul(tape.add(diff2, agg.var), tape.recip(g0_sq)), 0.5);
  Tape::NodeId term2 = tape.sub(tape.log_op(agg.g0), tape.log_op(agg.std));
  return tape.sum(tape.add_const(tape.add(term1, term2), -0.5));
}

}  // namespace

Tape::NodeId elbo_loss_node(Tape& tape, const EstimatorModel& model,
                            const PreparedDataset& data,
                            const std::vector<Vec>& eps_draws) {
  if (data.chunks.empty()) {
    throw std::invalid_argument("elbo_loss: environment has no chunks");
  }
  if (eps_draws.empty()) {
    throw std::invalid_argument("elbo_loss: need at least one eps draw");
  }
  const int td = model.target_dim();
  std::vector<Tape::NodeId> mu, sigma;
  mu.reserve(data.chunks.size());
  sigma.reserve(data.chunks.size());
  for (const Chunk& c : data.chunks) {
    Tape::NodeId out = diffnum::mlp_forward(tape, model.elemental, "elemental",
                                            tape.input(model.chunk_input(c)));
    mu.push_back(tape.slice(out, 0, td));
    sigma.push_back(tape.slice(out, td, td));
  }
  AggregateNodes agg = aggregate_nodes(tape, model, mu, sigma);

  Tape::NodeId sse_sum = -1;
  for (const Vec& eps : eps_draws) {
    Tape::NodeId eta_hat =
        tape.add(agg.mean, tape.mul(agg.std, tape.input(eps)));
    Tape::NodeId sse = env_sse_node(tape, model, data, eta_hat);
    sse_sum = sse_sum < 0 ? sse : tape.add(sse_sum, sse);
  }
  const double coeff =
      1.0 / (2.0 * model.v * model.v * static_cast<double>(eps_draws.size()));
  return tape.add(tape.scale(sse_sum, coeff), kl_node(tape, agg));
}

std::vector<Vec> draw_eps(int eps_samples, int dim, core::SeededRng& rng) {
  std::vector<Vec> draws(static_cast<std::size_t>(eps_samples));
  for (Vec& e : draws) {
    e.resize(static_cast<std::size_t>(dim));
    for (double& x : e) x = rng.normal();
  }
  return draws;
}

double elbo_loss(const ParamStore& params, const EstimatorModel& model,
                 const std::vector<Chunk>& chunks, int eps_samples,
                 core::SeededRng& rng) {
  PreparedDataset data = prepare_dataset(model, chunks);
  Tape tape(params);
  Tape::NodeId loss = elbo_loss_node(
      tape, model, data, draw_eps(eps_samples, model.target_dim(), rng));
  return tape.scalar(loss);
}

void EstimatorModel::save(const std::filesystem::path& dir,
                          const ParamStore& params) const {
  diffnum::save_checkpoint(params, dir);
  nlohmann::json j;
  j["family"] = envs::family_to_string(family);
  j["base"] = base;
  j["obs_dim"] = obs_dim;
  j["act_dim"] = act_dim;
  j["T"] = T;
  j["n_omega"] = n_omega;
  j["noise_mode"] = noise_mode;
  j["tau_seed"] = tau_seed;
  j["d_phi"] = d_phi;
  j["K"] = K;
  j["dt"] = dt;
  j["v"] = v;
  j["train_prior"] = train_prior;
  j["hidden"] = std::vector<int>(elemental.widths.begin() + 1,
                                 elemental.widths.end() - 1);
  std::ofstream f(dir / "model.json");
  if (!f) throw std::runtime_error("cannot write model.json in " + dir.string());
  f << j.dump(2) << '\n';
}

EstimatorModel EstimatorModel::load(const std::filesystem::path& dir,
                                    ParamStore* params) {
  std::ifstream f(dir / "model.json");
  if (!f) throw std::runtime_error("cannot read model.json in " + dir.string());
  nlohmann::json j = nlohmann::json::parse(f);

  envs::EnvSpec env = envs::make_default_spec(
      envs::family_from_string(j.at("family").get<std::string>()));
  env.dynamics.base = j.at("base").get<Vec>();
  env.dynamics.values = env.dynamics.base;
  env.dt = j.at("dt").get<double>();
  if (j.at("noise_mode").get<bool>()) {
    envs::MotorNoiseSpec motor;
    motor.tau_seed = j.at("tau_seed").get<std::uint64_t>();
    motor.d_phi = j.at("d_phi").get<int>();
    motor.K = j.at("K").get<double>();
    env.motor = motor;
  }
  EstimatorModel m = create(env, j.at("T").get<int>(),
                            j.at("hidden").get<std::vector<int>>(),
                            j.at("noise_mode").get<bool>(),
                            j.at("v").get<double>(),
                            j.at("train_prior").get<bool>());
  if (params) *params = diffnum::load_checkpoint(dir);
  return m;
}

}  // namespace dypol::sysid
