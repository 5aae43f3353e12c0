#include "dypol/harness/pipelines.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "dypol/diffnum/checkpoint.hpp"
#include "json.hpp"

namespace dypol::harness {

using core::DynamicsVector;
using core::Episode;
using diffnum::ParamStore;

namespace {

double mean_of(const Vec& xs) {
  if (xs.empty()) return 0.0;
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

double std_of(const Vec& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return std::sqrt(v / static_cast<double>(xs.size()));
}

double stderr_of(const Vec& xs) {
  if (xs.size() < 2) return 0.0;
  return std_of(xs) / std::sqrt(static_cast<double>(xs.size()));
}

char* fmt(char* buf, std::size_t n, double x) {
  std::snprintf(buf, n, "%.17g", x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// checkpoint bundles

void save_policy(const PolicyBundle& bundle, const std::filesystem::path& dir) {
  diffnum::save_checkpoint(bundle.params, dir);
  const dcp::PolicyConfig& pc = bundle.policy.config();
  nlohmann::json j;
  j["obs_dim"] = pc.obs_dim;
  j["act_dim"] = pc.act_dim;
  j["dyn_dim"] = pc.dyn_dim;
  j["h_obs"] = pc.h_obs;
  j["h_dyn"] = pc.h_dyn;
  j["hidden"] = pc.hidden;
  j["use_dyn_encoding"] = pc.use_dyn_encoding;
  j["std_floor"] = pc.std_floor;
  j["w_inv"] = pc.w_inv;
  j["w_rec"] = pc.w_rec;
  j["noise_mode"] = bundle.noise_mode;
  std::ofstream f(dir / "policy.json");
  if (!f) throw std::runtime_error("cannot write policy.json in " + dir.string());
  f << j.dump(2) << '\n';
}

PolicyBundle load_policy(const std::filesystem::path& dir) {
  std::ifstream f(dir / "policy.json");
  if (!f) throw std::runtime_error("cannot read policy.json in " + dir.string());
  nlohmann::json j = nlohmann::json::parse(f);
  dcp::PolicyConfig pc;
  pc.obs_dim = j.at("obs_dim").get<int>();
  pc.act_dim = j.at("act_dim").get<int>();
  pc.dyn_dim = j.at("dyn_dim").get<int>();
  pc.h_obs = j.at("h_obs").get<int>();
  pc.h_dyn = j.at("h_dyn").get<int>();
  pc.hidden = j.at("hidden").get<std::vector<int>>();
  pc.use_dyn_encoding = j.at("use_dyn_encoding").get<bool>();
  pc.std_floor = j.at("std_floor").get<double>();
  pc.w_inv = j.at("w_inv").get<double>();
  pc.w_rec = j.at("w_rec").get<double>();
  PolicyBundle bundle{dcp::DynamicsConditionedPolicy(pc),
                      diffnum::load_checkpoint(dir),
                      j.at("noise_mode").get<bool>()};
  return bundle;
}

// ---------------------------------------------------------------------------
// off-policy data

static Episode roll_offpolicy(const envs::EnvSpec& env, int env_id,
                              std::uint64_t ep_seed,
                              const dcp::DynamicsConditionedPolicy* policy,
                              const ParamStore* params, const Vec* dyn_cond) {
  core::SeededRng reset_rng(ep_seed, core::streams::kEnvReset);
  core::SeededRng noise_rng(ep_seed, core::streams::kEnvNoise);
  core::SeededRng action_rng(ep_seed, core::streams::kActionSample);

  const envs::FamilyInfo& info = envs::family_info(env.family);
  Episode ep;
  ep.env_id = env_id;
  ep.dynamics = env.dynamics;

  Vec z_dyn;
  if (policy && policy->config().use_dyn_encoding) {
    z_dyn = policy->encode_dyn(*params, *dyn_cond);
  }

  envs::State s = envs::reset(env, reset_rng);
  for (int t = 0; t < env.horizon; ++t) {
    Vec action(static_cast<std::size_t>(info.act_dim));
    if (policy) {
      dcp::LatentState z;
      z.z_obs = policy->encode_obs(*params, s.vector);
      z.z = z.z_obs;
      z.z.insert(z.z.end(), z_dyn.begin(), z_dyn.end());
      action = dcp::sample_action(policy->policy_forward(*params, z), action_rng).first;
    } else {
      for (double& a : action) {
        a = action_rng.uniform(-info.action_limit, info.action_limit);
      }
    }
    const double r = envs::reward(env, s, action);
    envs::State next = envs::step(env, s, action, noise_rng);
    ep.transitions.push_back(
        {s.vector, action, next.vector, r, t + 1});
    s = std::move(next);
  }
  return ep;
}

std::vector<Episode> collect_offpolicy_random(const envs::EnvSpec& env,
                                              int episodes, int env_id,
                                              std::uint64_t seed,
                                              std::uint64_t stream_index) {
  if (episodes < 1) throw std::invalid_argument("collect_offpolicy: episodes >= 1");
  core::SeededRng seeder =
      core::derive_stream(seed, core::streams::kOffPolicy, stream_index);
  std::vector<Episode> out;
  out.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    out.push_back(roll_offpolicy(env, env_id, seeder.next_u64(), nullptr,
                                 nullptr, nullptr));
  }
  return out;
}

std::vector<Episode> collect_offpolicy_policy(
    const envs::EnvSpec& env, int episodes, int env_id,
    const dcp::DynamicsConditionedPolicy& policy, const ParamStore& params,
    const Vec& dyn_cond, std::uint64_t seed, std::uint64_t stream_index) {
  if (episodes < 1) throw std::invalid_argument("collect_offpolicy: episodes >= 1");
  core::SeededRng seeder =
      core::derive_stream(seed, core::streams::kOffPolicy, stream_index);
  std::vector<Episode> out;
  out.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    out.push_back(roll_offpolicy(env, env_id, seeder.next_u64(), &policy,
                                 &params, &dyn_cond));
  }
  return out;
}

// ---------------------------------------------------------------------------
// training pipelines

dcp::PolicyConfig make_policy_config(const ExperimentConfig& cfg) {
  const envs::FamilyInfo& info = envs::family_info(cfg.env.family);
  dcp::PolicyConfig pc;
  pc.obs_dim = info.obs_dim;
  pc.act_dim = info.act_dim;
  pc.dyn_dim = cfg.cond_dim();
  pc.h_obs = cfg.policy_h_obs;
  pc.h_dyn = cfg.policy_h_dyn;
  pc.hidden = cfg.policy_hidden;
  pc.use_dyn_encoding = cfg.ablation.use_eta_encoding;
  pc.w_inv = cfg.ablation.w_inv;
  pc.w_rec = cfg.ablation.w_rec;
  return pc;
}

PolicyBundle train_policy_pipeline(const ExperimentConfig& cfg, std::uint64_t seed,
                                   const std::optional<std::filesystem::path>& out_dir,
                                   std::vector<ppo::IterStats>* curve) {
  dcp::DynamicsConditionedPolicy policy(make_policy_config(cfg));
  ppo::TrainResult res = ppo::train(policy, cfg.env, cfg.ppo, seed, out_dir);
  if (curve) *curve = res.curve;
  PolicyBundle bundle{std::move(policy), std::move(res.params),
                      cfg.ablation.noise_mode};
  if (out_dir) save_policy(bundle, *out_dir / "final");
  return bundle;
}

static envs::EnvSpec instantiate_env(const ExperimentConfig& cfg,
                                     core::SeededRng& dyn_rng) {
  envs::EnvSpec env = cfg.env;
  env.dynamics =
      core::sample_dynamics(cfg.env.dynamics, cfg.env.dynamics.range_frac, dyn_rng);
  if (env.motor) {
    const envs::FamilyInfo& info = envs::family_info(cfg.env.family);
    env.motor->omega.resize(
        static_cast<std::size_t>(info.act_dim * env.motor->d_phi));
    for (double& w : env.motor->omega) {
      w = dyn_rng.uniform(-cfg.omega_range, cfg.omega_range);
    }
  }
  return env;
}

SysidData collect_sysid_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  SysidData data;
  for (int e = 0; e < cfg.sysid.n_train_envs; ++e) {
    core::SeededRng dyn_rng =
        core::derive_stream(seed, core::streams::kDynTrain, 500000 + e);
    envs::EnvSpec env = instantiate_env(cfg, dyn_rng);
    std::vector<Episode> eps = collect_offpolicy_random(
        env, cfg.sysid.episodes_per_env, e + 1, seed, 500000 + e);
    std::vector<core::Chunk> chunks;
    for (const Episode& ep : eps) {
      auto cs = core::chunk_episode(ep, cfg.sysid.T);
      chunks.insert(chunks.end(), cs.begin(), cs.end());
    }
    data.dynamics.push_back(env.dynamics);
    data.omegas.push_back(env.motor ? env.motor->omega : Vec{});
    data.episodes.push_back(std::move(eps));
    data.chunks.push_back(std::move(chunks));
  }
  return data;
}

SysidBundle train_sysid_from_datasets(
    const ExperimentConfig& cfg, const std::vector<std::vector<core::Chunk>>& datasets,
    std::uint64_t seed, Vec* loss_curve) {
  sysid::EstimatorModel model = sysid::EstimatorModel::create(
      cfg.env, cfg.sysid.T, cfg.sysid.hidden, cfg.ablation.noise_mode,
      cfg.sysid.likelihood_noise(cfg.env.noise_std), cfg.sysid.train_prior);
  sysid::SysidTrainConfig tc;
  tc.steps = cfg.sysid.steps;
  tc.lr = cfg.sysid.lr;
  tc.eps_samples = cfg.sysid.eps_samples;
  tc.grad_clip = cfg.sysid.grad_clip;
  tc.prior_f0 = cfg.sysid.prior_f0;
  tc.prior_g0 = cfg.sysid.prior_g0;
  sysid::SysidTrainResult res = sysid::train_sysid(model, datasets, tc, seed);
  if (loss_curve) *loss_curve = res.loss_curve;
  return SysidBundle{std::move(model), std::move(res.params)};
}

SysidBundle train_sysid_pipeline(const ExperimentConfig& cfg, std::uint64_t seed,
                                 const std::optional<std::filesystem::path>& out_dir,
                                 Vec* loss_curve) {
  SysidData data = collect_sysid_data(cfg, seed);
  SysidBundle bundle = train_sysid_from_datasets(cfg, data.chunks, seed, loss_curve);
  if (out_dir) bundle.model.save(*out_dir, bundle.params);
  return bundle;
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

// Deterministic rollout: mean action, shared reset/process-noise streams so
// conditionings are compared on identical episodes.
double eval_episode_reward(const dcp::DynamicsConditionedPolicy& policy,
                           const ParamStore& params, const envs::EnvSpec& env,
                           const Vec& dyn_cond, std::uint64_t seed,
                           std::uint64_t episode_key) {
  core::SeededRng reset_rng(core::mix64(seed) ^ episode_key, core::streams::kEnvReset);
  core::SeededRng noise_rng(core::mix64(seed) ^ episode_key, core::streams::kEnvNoise);
  const Vec z_dyn = policy.encode_dyn(params, dyn_cond);
  envs::State s = envs::reset(env, reset_rng);
  double total = 0.0;
  for (int t = 0; t < env.horizon; ++t) {
    dcp::LatentState z;
    z.z_obs = policy.encode_obs(params, s.vector);
    z.z = z.z_obs;
    z.z.insert(z.z.end(), z_dyn.begin(), z_dyn.end());
    const Vec action = policy.policy_forward(params, z).mean;
    total += envs::reward(env, s, action);
    s = envs::step(env, s, action, noise_rng);
  }
  return total;
}

struct CondRewards {
  double mean = 0.0;
  double stddev = 0.0;
};

CondRewards eval_conditioning(const dcp::DynamicsConditionedPolicy& policy,
                              const ParamStore& params, const envs::EnvSpec& env,
                              const Vec& cond, int episodes, std::uint64_t seed,
                              int env_index) {
  Vec rewards(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t key =
        static_cast<std::uint64_t>(env_index) * 1000003ULL +
        static_cast<std::uint64_t>(e);
    rewards[static_cast<std::size_t>(e)] =
        eval_episode_reward(policy, params, env, cond, seed, key);
  }
  return {mean_of(rewards), std_of(rewards)};
}

}  // namespace

EvalReport evaluate_zero_shot(const ExperimentConfig& cfg,
                              const PolicyBundle& bundle,
                              const SysidBundle& sysid, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const dcp::DynamicsConditionedPolicy& policy = bundle.policy;
  const ParamStore& params = bundle.params;
  const sysid::EstimatorModel& model = sysid.model;
  const int d = model.dyn_dim();
  const bool use_encoding = policy.config().use_dyn_encoding;
  const bool cond_omega = bundle.noise_mode;

  EvalReport report;
  Vec zs, os, bs;
  for (int i = 0; i < cfg.eval.n_test_envs; ++i) {
    EnvEvalRow row;
    row.env_index = i;
    core::SeededRng dyn_rng = core::derive_stream(seed, core::streams::kDynTest, i);
    envs::EnvSpec env = instantiate_env(cfg, dyn_rng);
    row.eta_true = env.dynamics.values;
    if (env.motor) row.omega_true = env.motor->omega;

    Vec est_cond, oracle_cond, base_cond;
    if (use_encoding) {
      try {
        const std::vector<Episode> data = collect_offpolicy_random(
            env, cfg.eval.offpolicy_episodes, i + 1, seed,
            900000 + static_cast<std::uint64_t>(i));
        sysid::PosteriorEstimate est = model.estimate_raw(sysid.params, data);
        row.eta_hat = est.posterior.mean;
        row.posterior_std = est.posterior.std;
        row.k_used = est.k_used;
        row.n_clamped = static_cast<int>(est.clamped_dims.size());

        est_cond.resize(est.posterior.mean.size());
        for (int j = 0; j < d; ++j) {
          est_cond[static_cast<std::size_t>(j)] =
              est.posterior.mean[static_cast<std::size_t>(j)] /
                  model.base[static_cast<std::size_t>(j)] - 1.0;
        }
        for (std::size_t j = static_cast<std::size_t>(d);
             j < est.posterior.mean.size(); ++j) {
          est_cond[j] = est.posterior.mean[j];
        }

        // The estimator resolves the product K*omega, so the identifiable
        // omega truth is scaled by K_env/K_model.
        Vec omega_eff = row.omega_true;
        if (model.noise_mode && model.K > 0.0 && env.motor) {
          for (double& w : omega_eff) w *= env.motor->K / model.K;
        }
        row.abs_err.resize(est.posterior.mean.size());
        for (std::size_t j = 0; j < est.posterior.mean.size(); ++j) {
          const double truth = j < static_cast<std::size_t>(d)
                                   ? env.dynamics.values[j]
                                   : omega_eff[j - static_cast<std::size_t>(d)];
          row.abs_err[j] = std::abs(est.posterior.mean[j] - truth);
        }

        oracle_cond = core::normalize_dynamics(env.dynamics);
        base_cond.assign(static_cast<std::size_t>(d), 0.0);
        if (cond_omega) {
          oracle_cond.insert(oracle_cond.end(), omega_eff.begin(), omega_eff.end());
          base_cond.resize(base_cond.size() + omega_eff.size(), 0.0);
        }
      } catch (const std::exception& err) {
        row.skipped = true;
        row.error = err.what();
        report.rows.push_back(std::move(row));
        continue;
      }
    }

    const CondRewards est_r = eval_conditioning(
        policy, params, env, est_cond, cfg.eval.episodes_per_env, seed, i);
    const CondRewards oracle_r = eval_conditioning(
        policy, params, env, oracle_cond, cfg.eval.episodes_per_env, seed, i);
    const CondRewards base_r = eval_conditioning(
        policy, params, env, base_cond, cfg.eval.episodes_per_env, seed, i);

    row.reward_mean = est_r.mean;
    row.reward_std = est_r.stddev;
    row.zero_shot_reward = est_r.mean;
    row.oracle_reward = oracle_r.mean;
    row.base_reward = base_r.mean;
    zs.push_back(est_r.mean);
    os.push_back(oracle_r.mean);
    bs.push_back(base_r.mean);
    report.rows.push_back(std::move(row));
  }

  report.n_evaluated = static_cast<int>(zs.size());
  report.mean_zero_shot = mean_of(zs);
  report.mean_oracle = mean_of(os);
  report.mean_base = mean_of(bs);
  report.se_zero_shot = stderr_of(zs);
  report.se_oracle = stderr_of(os);
  report.se_base = stderr_of(bs);
  report.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "env_index,skipped,zero_shot_reward,oracle_reward,base_reward,"
       "reward_std,k_used,n_clamped,eta_true,eta_hat,posterior_std,abs_err\n";
  char buf[64];
  auto join = [&](const Vec& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ';';
      s += fmt(buf, sizeof(buf), v[i]);
    }
    return s;
  };
  for (const EnvEvalRow& r : report.rows) {
    Vec truth = r.eta_true;
    truth.insert(truth.end(), r.omega_true.begin(), r.omega_true.end());
    f << r.env_index << ',' << (r.skipped ? 1 : 0) << ','
      << fmt(buf, sizeof(buf), r.zero_shot_reward) << ',';
    f << fmt(buf, sizeof(buf), r.oracle_reward) << ',';
    f << fmt(buf, sizeof(buf), r.base_reward) << ',';
    f << fmt(buf, sizeof(buf), r.reward_std) << ',' << r.k_used << ','
      << r.n_clamped << ',' << join(truth) << ',' << join(r.eta_hat) << ','
      << join(r.posterior_std) << ',' << join(r.abs_err) << '\n';
  }
}

void write_eval_json(const EvalReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  j["n_evaluated"] = report.n_evaluated;
  j["mean_zero_shot"] = report.mean_zero_shot;
  j["mean_oracle"] = report.mean_oracle;
  j["mean_base"] = report.mean_base;
  j["se_zero_shot"] = report.se_zero_shot;
  j["se_oracle"] = report.se_oracle;
  j["se_base"] = report.se_base;
  j["runtime_s"] = report.runtime_s;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// fine-tuning

FinetuneResult finetune(const ExperimentConfig& cfg, const PolicyBundle& bundle,
                        const SysidBundle& sysid, const envs::EnvSpec& test_env,
                        int episodes, std::uint64_t seed) {
  FinetuneResult result;
  result.params = bundle.params;
  if (episodes == 0) return result;
  if (episodes < 0) throw std::invalid_argument("finetune: episodes must be >= 0");

  Vec cond;
  if (bundle.policy.config().use_dyn_encoding) {
    const std::vector<Episode> data = collect_offpolicy_random(
        test_env, cfg.eval.offpolicy_episodes, 1, seed, 700001);
    sysid::PosteriorEstimate est = sysid.model.estimate_raw(sysid.params, data);
    const int d = sysid.model.dyn_dim();
    cond.resize(est.posterior.mean.size());
    for (int j = 0; j < d; ++j) {
      cond[static_cast<std::size_t>(j)] =
          est.posterior.mean[static_cast<std::size_t>(j)] /
              sysid.model.base[static_cast<std::size_t>(j)] - 1.0;
    }
    for (std::size_t j = static_cast<std::size_t>(d); j < cond.size(); ++j) {
      cond[j] = est.posterior.mean[j];
    }
  }

  // episode 0: the zero-shot measurement
  const CondRewards zero = eval_conditioning(bundle.policy, result.params,
                                             test_env, cond,
                                             cfg.eval.episodes_per_env, seed, 0);
  result.curve.push_back(zero.mean);

  int remaining = episodes;
  std::uint64_t iter = 0;
  while (remaining > 0) {
    const int n = std::min(cfg.ppo.episodes_per_iter, remaining);
    ppo::RolloutBatch batch =
        ppo::collect_fixed(bundle.policy, result.params, test_env, cond, n,
                           cfg.ppo, seed, 800000 + iter);
    for (const ppo::EpisodeRollout& ep : batch.episodes) {
      result.curve.push_back(ep.total_reward);
    }
    ppo::update(bundle.policy, result.params, batch, cfg.ppo);
    remaining -= n;
    ++iter;
  }
  return result;
}

// ---------------------------------------------------------------------------
// experiment suites

std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(
    const ExperimentConfig& base) {
  std::vector<std::pair<std::string, ExperimentConfig>> out;
  ExperimentConfig full = base;
  full.ablation.use_eta_encoding = true;
  out.emplace_back("full", full);

  ExperimentConfig no_reg = full;
  no_reg.ablation.w_inv = 0.0;
  no_reg.ablation.w_rec = 0.0;
  out.emplace_back("no_reg", no_reg);

  ExperimentConfig only_inv = full;
  only_inv.ablation.w_rec = 0.0;
  out.emplace_back("only_inv", only_inv);

  ExperimentConfig only_rec = full;
  only_rec.ablation.w_inv = 0.0;
  out.emplace_back("only_rec", only_rec);

  ExperimentConfig ff = full;
  ff.ablation.use_eta_encoding = false;
  ff.ablation.w_inv = 0.0;
  ff.ablation.w_rec = 0.0;
  out.emplace_back("ff", ff);
  return out;
}

std::vector<AblationRow> run_ablation_suite(const ExperimentConfig& cfg,
                                            int n_seeds) {
  auto variants = ablation_variants(cfg);
  std::vector<Vec> per_variant(variants.size());

  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    // one estimator per seed, shared by every eta-using variant
    SysidBundle sysid = train_sysid_pipeline(cfg, seed, std::nullopt);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const ExperimentConfig& vcfg = variants[v].second;
      PolicyBundle policy = train_policy_pipeline(vcfg, seed, std::nullopt);
      EvalReport report = evaluate_zero_shot(vcfg, policy, sysid, seed);
      per_variant[v].push_back(report.mean_zero_shot);
      std::cerr << "ablation: seed " << seed << " variant " << variants[v].first
                << " zero-shot " << report.mean_zero_shot << '\n';
    }
  }

  std::vector<AblationRow> rows;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    rows.push_back({variants[v].first, mean_of(per_variant[v]),
                    std_of(per_variant[v]), n_seeds});
  }
  return rows;
}

std::vector<RangeSweepRow> run_range_sweep(const ExperimentConfig& cfg,
                                           const Vec& ranges, int n_seeds) {
  std::vector<RangeSweepRow> rows;
  for (double range : ranges) {
    ExperimentConfig rcfg = cfg;
    rcfg.env.dynamics.range_frac = range;
    rcfg.ppo.range_frac = range;

    ExperimentConfig ffcfg = rcfg;
    ffcfg.ablation.use_eta_encoding = false;
    ffcfg.ablation.w_inv = 0.0;
    ffcfg.ablation.w_rec = 0.0;

    Vec full_r, ff_r;
    for (int s = 0; s < n_seeds; ++s) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
      SysidBundle sysid = train_sysid_pipeline(rcfg, seed, std::nullopt);
      PolicyBundle full = train_policy_pipeline(rcfg, seed, std::nullopt);
      full_r.push_back(evaluate_zero_shot(rcfg, full, sysid, seed).mean_zero_shot);
      PolicyBundle ff = train_policy_pipeline(ffcfg, seed, std::nullopt);
      ff_r.push_back(evaluate_zero_shot(ffcfg, ff, sysid, seed).mean_zero_shot);
      std::cerr << "sweep: range " << range << " seed " << seed << " full "
                << full_r.back() << " ff " << ff_r.back() << '\n';
    }
    rows.push_back({range, mean_of(full_r), std_of(full_r), mean_of(ff_r),
                    std_of(ff_r), n_seeds});
  }
  return rows;
}

std::vector<NoiseEvalRow> run_noise_eval(const ExperimentConfig& cfg,
                                         const Vec& K_values, int n_seeds) {
  if (!cfg.env.motor || cfg.env.motor->K <= 0.0) {
    throw std::invalid_argument("noise eval: config needs env.motor with K > 0");
  }
  ExperimentConfig noise_cfg = cfg;
  noise_cfg.ablation.noise_mode = true;
  noise_cfg.ppo.condition_on_omega = true;
  ExperimentConfig nonoise_cfg = cfg;
  nonoise_cfg.ablation.noise_mode = false;
  nonoise_cfg.ppo.condition_on_omega = false;

  struct Trained {
    PolicyBundle policy;
    SysidBundle sysid;
  };
  std::vector<Trained> noise_models, nonoise_models;
  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    noise_models.push_back({train_policy_pipeline(noise_cfg, seed, std::nullopt),
                            train_sysid_pipeline(noise_cfg, seed, std::nullopt)});
    nonoise_models.push_back(
        {train_policy_pipeline(nonoise_cfg, seed, std::nullopt),
         train_sysid_pipeline(nonoise_cfg, seed, std::nullopt)});
  }

  std::vector<NoiseEvalRow> rows;
  for (const std::string scenario : {"known", "unknown"}) {
    for (double K : K_values) {
      auto eval_with = [&](const ExperimentConfig& vcfg,
                           const std::vector<Trained>& models) {
        Vec means;
        for (int s = 0; s < n_seeds; ++s) {
          ExperimentConfig ecfg = vcfg;
          ecfg.env.motor->K = K;
          if (scenario == "unknown") {
            ecfg.env.motor->tau_seed = vcfg.env.motor->tau_seed + 1000003ULL;
          }
          const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
          means.push_back(evaluate_zero_shot(ecfg, models[static_cast<std::size_t>(s)].policy,
                                             models[static_cast<std::size_t>(s)].sysid, seed)
                              .mean_zero_shot);
        }
        return means;
      };
      const Vec noise_means = eval_with(noise_cfg, noise_models);
      const Vec nonoise_means = eval_with(nonoise_cfg, nonoise_models);
      NoiseEvalRow row;
      row.scenario = scenario;
      row.K = K;
      row.noise_mean = mean_of(noise_means);
      row.noise_std = std_of(noise_means);
      row.nonoise_mean = mean_of(nonoise_means);
      row.nonoise_std = std_of(nonoise_means);
      const double se1 = stderr_of(noise_means);
      const double se2 = stderr_of(nonoise_means);
      row.pooled_se = std::sqrt(se1 * se1 + se2 * se2);
      row.n_seeds = n_seeds;
      rows.push_back(std::move(row));
      std::cerr << "noise eval: " << scenario << " K=" << K << " noise "
                << rows.back().noise_mean << " nonoise "
                << rows.back().nonoise_mean << '\n';
    }
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  f << "variant,mean_zero_shot,std_zero_shot,n_seeds\n";
  for (const AblationRow& r : rows) {
    f << r.variant << ',' << fmt(buf, sizeof(buf), r.mean_zero_shot) << ','
      << fmt(buf, sizeof(buf), r.std_zero_shot) << ',' << r.n_seeds << '\n';
  }
}

void write_sweep_csv(const std::vector<RangeSweepRow>& rows,
                     const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  f << "range,full_mean,full_std,ff_mean,ff_std,gap,n_seeds\n";
  for (const RangeSweepRow& r : rows) {
    f << fmt(buf, sizeof(buf), r.range) << ','
      << fmt(buf, sizeof(buf), r.full_mean) << ','
      << fmt(buf, sizeof(buf), r.full_std) << ','
      << fmt(buf, sizeof(buf), r.ff_mean) << ','
      << fmt(buf, sizeof(buf), r.ff_std) << ','
      << fmt(buf, sizeof(buf), r.full_mean - r.ff_mean) << ',' << r.n_seeds
      << '\n';
  }
}

void write_noise_csv(const std::vector<NoiseEvalRow>& rows,
                     const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  f << "scenario,K,noise_mean,noise_std,nonoise_mean,nonoise_std,pooled_se,"
       "n_seeds\n";
  for (const NoiseEvalRow& r : rows) {
    f << r.scenario << ',' << fmt(buf, sizeof(buf), r.K) << ','
      << fmt(buf, sizeof(buf), r.noise_mean) << ','
      << fmt(buf, sizeof(buf), r.noise_std) << ','
      << fmt(buf, sizeof(buf), r.nonoise_mean) << ','
      << fmt(buf, sizeof(buf), r.nonoise_std) << ','
      << fmt(buf, sizeof(buf), r.pooled_se) << ',' << r.n_seeds << '\n';
  }
}

}  // namespace dypol::harness
