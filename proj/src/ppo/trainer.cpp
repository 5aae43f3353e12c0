#include "dypol/ppo/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "dypol/diffnum/checkpoint.hpp"
#include "dypol/diffnum/sgd.hpp"

namespace dypol::ppo {

using diffnum::ParamStore;
using diffnum::Tape;

Vec make_dyn_cond(const core::DynamicsVector& dyn, const Vec& omega,
                  bool condition_on_omega) {
  Vec cond = core::normalize_dynamics(dyn);
  if (condition_on_omega) cond.insert(cond.end(), omega.begin(), omega.end());
  return cond;
}

namespace {

EpisodeRollout roll_episode(const dcp::DynamicsConditionedPolicy& policy,
                            const ParamStore& params, const envs::EnvSpec& env,
                            const Vec& dyn_cond, core::SeededRng& reset_rng,
                            core::SeededRng& noise_rng,
                            core::SeededRng& action_rng) {
  EpisodeRollout ep;
  ep.dynamics = env.dynamics;
  ep.dyn_cond = dyn_cond;
  if (env.motor) ep.omega = env.motor->omega;

  const Vec z_dyn = policy.encode_dyn(params, dyn_cond);
  envs::State s = envs::reset(env, reset_rng);
  for (int t = 0; t < env.horizon; ++t) {
    dcp::LatentState z;
    z.z_obs = policy.encode_obs(params, s.vector);
    z.z_dyn = z_dyn;  // computed once per episode
    z.z = z.z_obs;
    z.z.insert(z.z.end(), z_dyn.begin(), z_dyn.end());

    const dcp::ActionDistribution dist = policy.policy_forward(params, z);
    auto [action, lp] = dcp::sample_action(dist, action_rng);
    const double r = envs::reward(env, s, action);
    envs::State next = envs::step(env, s, action, noise_rng);

    ep.obs.push_back(s.vector);
    ep.actions.push_back(action);
    ep.log_probs.push_back(lp);
    ep.rewards.push_back(r);
    ep.values.push_back(policy.value(params, z));
    ep.total_reward += r;
    s = std::move(next);
  }
  ep.final_obs = s.vector;
  dcp::LatentState zf;
  zf.z_obs = policy.encode_obs(params, s.vector);
  zf.z = zf.z_obs;
  zf.z.insert(zf.z.end(), z_dyn.begin(), z_dyn.end());
  ep.bootstrap_value = policy.value(params, zf);
  return ep;
}

}  // namespace

RolloutBatch collect(const dcp::DynamicsConditionedPolicy& policy,
                     const ParamStore& params, const envs::EnvSpec& env_base,
                     const PpoConfig& cfg, std::uint64_t seed,
                     std::uint64_t iter_index) {
  RolloutBatch batch;
  core::SeededRng episode_seeder =
      core::derive_stream(seed, core::streams::kDynTrain, iter_index);
  int faults = 0;
  for (int e = 0; e < cfg.episodes_per_iter; ++e) {
    const std::uint64_t ep_seed = episode_seeder.next_u64();
    core::SeededRng dyn_rng(ep_seed, core::streams::kDynTrain);
    core::SeededRng reset_rng(ep_seed, core::streams::kEnvReset);
    core::SeededRng noise_rng(ep_seed, core::streams::kEnvNoise);
    core::SeededRng action_rng(ep_seed, core::streams::kActionSample);
    core::SeededRng omega_rng(ep_seed, core::streams::kMotorOmega);

    envs::EnvSpec env = env_base;
    env.dynamics = core::sample_dynamics(env_base.dynamics, cfg.range_frac, dyn_rng);
    if (env.motor) {
      const int n = policy.config().act_dim * env.motor->d_phi;
      env.motor->omega.resize(static_cast<std::size_t>(n));
      for (double& w : env.motor->omega) {
        w = omega_rng.uniform(-cfg.omega_range, cfg.omega_range);
      }
    }
    const Vec cond = make_dyn_cond(
        env.dynamics, env.motor ? env.motor->omega : Vec{}, cfg.condition_on_omega);
    try {
      batch.episodes.push_back(roll_episode(policy, params, env, cond,
                                            reset_rng, noise_rng, action_rng));
      batch.total_steps += env.horizon;
    } catch (const std::runtime_error& err) {
      ++faults;
      std::cerr << "collect: episode " << e << " aborted: " << err.what()
                << '\n';
    }
  }
  if (batch.episodes.empty()) {
    throw std::runtime_error("collect: every episode faulted");
  }
  return batch;
}

Tape::NodeId episode_loss_node(const dcp::DynamicsConditionedPolicy& policy,
                               Tape& tape, const EpisodeRollout& ep,
                               const GaeResult& adv, const PpoConfig& cfg,
                               double inv_n, UpdateReport* acc) {
  const dcp::PolicyConfig& pc = policy.config();
  const int T = static_cast<int>(ep.obs.size());

  Tape::NodeId z_dyn = -1;
  if (pc.use_dyn_encoding) z_dyn = policy.encode_dyn_node(tape, ep.dyn_cond);

  std::vector<Tape::NodeId> z_obs(static_cast<std::size_t>(T));
  std::vector<Tape::NodeId> z(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    z_obs[static_cast<std::size_t>(t)] =
        policy.encode_obs_node(tape, ep.obs[static_cast<std::size_t>(t)]);
    z[static_cast<std::size_t>(t)] =
        policy.latent_node(tape, z_obs[static_cast<std::size_t>(t)], z_dyn);
  }
  Tape::NodeId z_final =
      policy.latent_node(tape, policy.encode_obs_node(tape, ep.final_obs), z_dyn);

  Tape::NodeId loss = -1;
  auto accumulate = [&](Tape::NodeId term) {
    loss = loss < 0 ? term : tape.add(loss, term);
  };

  for (int t = 0; t < T; ++t) {
    const std::size_t st = static_cast<std::size_t>(t);
    auto [mean, std_node] = policy.policy_nodes(tape, z[st]);
    Tape::NodeId lp = policy.log_prob_node(tape, mean, std_node, ep.actions[st]);
    Tape::NodeId ratio = tape.exp_op(tape.add_const(lp, -ep.log_probs[st]));
    const double a = adv.advantages[st];
    Tape::NodeId s1 = tape.scale(ratio, a);
    Tape::NodeId s2 =
        tape.scale(tape.clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), a);
    Tape::NodeId surr = tape.min2(s1, s2);
    if (acc) acc->surrogate += -tape.scalar(surr) * inv_n;
    accumulate(tape.scale(surr, -inv_n));

    Tape::NodeId v = policy.value_node(tape, z[st]);
    Tape::NodeId verr = tape.square(tape.add_const(v, -adv.returns[st]));
    if (acc) acc->value_loss += tape.scalar(verr) * inv_n;
    accumulate(tape.scale(verr, cfg.value_coef * inv_n));

    if (cfg.entropy_coef != 0.0) {
      Tape::NodeId ent = policy.entropy_node(tape, std_node);
      if (acc) acc->entropy += tape.scalar(ent) * inv_n;
      accumulate(tape.scale(ent, -cfg.entropy_coef * inv_n));
    }
    if (pc.w_inv > 0.0) {
      Tape::NodeId znext = t + 1 < T ? z[st + 1] : z_final;
      Tape::NodeId il = policy.inv_loss_node(tape, z[st], znext, ep.actions[st]);
      if (acc) acc->inv_loss += tape.scalar(il) * inv_n;
      accumulate(tape.scale(il, pc.w_inv * inv_n));
    }
    if (pc.w_rec > 0.0) {
      Tape::NodeId rl = policy.rec_loss_node(tape, z_obs[st], ep.obs[st]);
      if (acc) acc->rec_loss += tape.scalar(rl) * inv_n;
      accumulate(tape.scale(rl, pc.w_rec * inv_n));
    }
  }
  return loss;
}

RolloutBatch collect_fixed(const dcp::DynamicsConditionedPolicy& policy,
                           const ParamStore& params, const envs::EnvSpec& env,
                           const Vec& dyn_cond, int episodes,
                           const PpoConfig& cfg, std::uint64_t seed,
                           std::uint64_t iter_index) {
  (void)cfg;
  RolloutBatch batch;
  core::SeededRng episode_seeder =
      core::derive_stream(seed, core::streams::kDynTrain, iter_index);
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t ep_seed = episode_seeder.next_u64();
    core::SeededRng reset_rng(ep_seed, core::streams::kEnvReset);
    core::SeededRng noise_rng(ep_seed, core::streams::kEnvNoise);
    core::SeededRng action_rng(ep_seed, core::streams::kActionSample);
    batch.episodes.push_back(roll_episode(policy, params, env, dyn_cond,
                                          reset_rng, noise_rng, action_rng));
    batch.total_steps += env.horizon;
  }
  return batch;
}

UpdateReport update(const dcp::DynamicsConditionedPolicy& policy,
                    ParamStore& params, const RolloutBatch& batch,
                    const PpoConfig& cfg) {
  if (batch.episodes.empty()) throw std::invalid_argument("update: empty batch");
  const dcp::PolicyConfig& pc = policy.config();

  // advantages and returns, normalized across the whole batch
  std::vector<GaeResult> gaes;
  gaes.reserve(batch.episodes.size());
  Vec all_adv;
  all_adv.reserve(static_cast<std::size_t>(batch.total_steps));
  for (const EpisodeRollout& ep : batch.episodes) {
    gaes.push_back(gae(ep.rewards, ep.values, ep.bootstrap_value, cfg.gamma, cfg.lam));
    all_adv.insert(all_adv.end(), gaes.back().advantages.begin(),
                   gaes.back().advantages.end());
  }
  normalize_advantages(all_adv);
  {
    std::size_t at = 0;
    for (GaeResult& g : gaes) {
      for (double& a : g.advantages) a = all_adv[at++];
    }
  }

  const Vec snapshot = params.data();  // restored if any epoch goes non-finite
  const double inv_n = 1.0 / static_cast<double>(batch.total_steps);
  UpdateReport report;

  for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
    Vec grads(static_cast<std::size_t>(params.total()), 0.0);
    UpdateReport acc;

    for (std::size_t ei = 0; ei < batch.episodes.size(); ++ei) {
      Tape tape(params);
      Tape::NodeId loss = episode_loss_node(policy, tape, batch.episodes[ei],
                                            gaes[ei], cfg, inv_n, &acc);
      if (!std::isfinite(tape.scalar(loss))) {
        params.data() = snapshot;
        throw UpdateError("update: non-finite loss; parameters untouched");
      }
      tape.backward(loss);
      const Vec& pg = tape.param_grads();
      for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += pg[i];
    }

    if (epoch == 0) report = acc;

    if (cfg.grad_clip > 0.0) diffnum::clip_by_global_norm(grads, cfg.grad_clip);
    try {
      diffnum::sgd_step(params, grads, cfg.lr);
    } catch (const std::runtime_error&) {
      params.data() = snapshot;
      throw UpdateError("update: non-finite gradient; parameters untouched");
    }
  }
  return report;
}

TrainResult train(const dcp::DynamicsConditionedPolicy& policy,
                  const envs::EnvSpec& env_base, const PpoConfig& cfg,
                  std::uint64_t seed,
                  const std::optional<std::filesystem::path>& out_dir) {
  TrainResult result;
  core::SeededRng init_rng = core::derive_stream(seed, core::streams::kParamInit);
  policy.init_params(result.params, init_rng);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    RolloutBatch batch = collect(policy, result.params, env_base, cfg, seed,
                                 static_cast<std::uint64_t>(iter));
    double mean = 0.0;
    for (const EpisodeRollout& ep : batch.episodes) mean += ep.total_reward;
    mean /= static_cast<double>(batch.episodes.size());
    double var = 0.0;
    for (const EpisodeRollout& ep : batch.episodes) {
      var += (ep.total_reward - mean) * (ep.total_reward - mean);
    }
    const double stddev =
        std::sqrt(var / static_cast<double>(batch.episodes.size()));

    UpdateReport rep = update(policy, result.params, batch, cfg);
    result.curve.push_back({iter, mean, stddev, rep.surrogate, rep.value_loss,
                            rep.inv_loss, rep.rec_loss});

    if (out_dir && cfg.checkpoint_every > 0 &&
        (iter + 1) % cfg.checkpoint_every == 0) {
      diffnum::save_checkpoint(result.params,
                               *out_dir / ("ckpt_" + std::to_string(iter + 1)));
    }
  }
  if (out_dir) {
    diffnum::save_checkpoint(result.params, *out_dir / "final");
    write_curve_csv(result.curve, *out_dir / "curve.csv");
  }
  return result;
}

void write_curve_csv(const std::vector<IterStats>& curve,
                     const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "iter,mean_reward,std_reward,surrogate,value_loss,inv_loss,rec_loss\n";
  char buf[256];
  for (const IterStats& s : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  s.iter, s.mean_reward, s.std_reward, s.surrogate,
                  s.value_loss, s.inv_loss, s.rec_loss);
    f << buf;
  }
}

}  // namespace dypol::ppo
