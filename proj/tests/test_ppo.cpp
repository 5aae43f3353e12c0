#include "doctest.h"
#include "dypol/ppo/trainer.hpp"
#include "oracles.hpp"

using namespace dypol;
using diffnum::ParamStore;
using diffnum::Tape;
using ppo::EpisodeRollout;
using ppo::GaeResult;
using ppo::PpoConfig;
using ppo::RolloutBatch;

namespace {

dcp::PolicyConfig tiny_policy_config(bool use_dyn = true) {
  dcp::PolicyConfig pc;
  pc.obs_dim = 2;
  pc.act_dim = 1;
  pc.dyn_dim = 2;
  pc.h_obs = 4;
  pc.h_dyn = 2;
  pc.hidden = {6};
  pc.use_dyn_encoding = use_dyn;
  pc.w_inv = 0.1;
  pc.w_rec = 0.1;
  return pc;
}

envs::EnvSpec pm_env(double noise = 0.0, int horizon = 20) {
  envs::EnvSpec env = envs::make_default_spec(envs::Family::kPointMass1d);
  env.noise_std = noise;
  env.horizon = horizon;
  return env;
}

PpoConfig tiny_ppo(double range = 0.2) {
  PpoConfig cfg;
  cfg.episodes_per_iter = 4;
  cfg.range_frac = range;
  cfg.lr = 1e-3;
  return cfg;
}

// hand-built batch for update-level tests
RolloutBatch toy_batch(const dcp::DynamicsConditionedPolicy& policy,
                       const ParamStore& params, core::SeededRng& rng,
                       int episodes = 2, int T = 5, bool zero_signal = false) {
  RolloutBatch batch;
  for (int e = 0; e < episodes; ++e) {
    EpisodeRollout ep;
    ep.dyn_cond = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
    const Vec z_dyn = policy.encode_dyn(params, ep.dyn_cond);
    for (int t = 0; t < T; ++t) {
      Vec obs{rng.normal(), rng.normal()};
      dcp::LatentState z;
      z.z_obs = policy.encode_obs(params, obs);
      z.z = z.z_obs;
      z.z.insert(z.z.end(), z_dyn.begin(), z_dyn.end());
      auto [action, lp] = dcp::sample_action(policy.policy_forward(params, z), rng);
      ep.obs.push_back(obs);
      ep.actions.push_back(action);
      ep.log_probs.push_back(lp);
      ep.rewards.push_back(zero_signal ? 0.0 : rng.normal());
      ep.values.push_back(zero_signal ? 0.0 : policy.value(params, z));
      ep.total_reward += ep.rewards.back();
    }
    ep.final_obs = {rng.normal(), rng.normal()};
    ep.bootstrap_value = 0.0;
    batch.episodes.push_back(std::move(ep));
    batch.total_steps += T;
  }
  return batch;
}

}  // namespace

TEST_CASE("gae trivial cases") {
  SUBCASE("all zero rewards and values") {
    GaeResult g = ppo::gae(Vec(5, 0.0), Vec(5, 0.0), 0.0, 0.99, 0.95);
    for (double a : g.advantages) CHECK(a == 0.0);
  }
  SUBCASE("single step delta formula") {
    GaeResult g = ppo::gae(Vec{1.0}, Vec{0.0}, 0.0, 0.99, 0.95);
    CHECK(g.advantages[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.returns[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gae at lambda=1 equals discounted return minus value") {
  // brute-force discounted-sum oracle
  core::SeededRng rng(17, 0);
  const double gamma = 0.97;
  const int T = 12;
  Vec rewards(T), values(T);
  for (double& r : rewards) r = rng.normal();
  for (double& v : values) v = rng.normal();
  const double bootstrap = rng.normal();

  GaeResult g = ppo::gae(rewards, values, bootstrap, gamma, 1.0);
  for (int t = 0; t < T; ++t) {
    double ret = 0.0;
    double disc = 1.0;
    for (int s = t; s < T; ++s) {
      ret += disc * rewards[static_cast<std::size_t>(s)];
      disc *= gamma;
    }
    ret += disc * bootstrap;
    CHECK(g.advantages[static_cast<std::size_t>(t)] ==
          doctest::Approx(ret - values[static_cast<std::size_t>(t)]).epsilon(1e-10));
  }
}

TEST_CASE("advantage normalization invariant") {
  core::SeededRng rng(3, 1);
  Vec adv(257);
  for (double& a : adv) a = rng.normal(2.0, 5.0);
  ppo::normalize_advantages(adv);
  CHECK(std::abs(oracles::mean_of(adv)) < 1e-10);
  CHECK(std::abs(std::sqrt(oracles::var_of(adv)) - 1.0) < 1e-6);
}

TEST_CASE("collect: range 0 shares base dynamics; determinism; fresh eta per episode") {
  dcp::DynamicsConditionedPolicy policy(tiny_policy_config());
  ParamStore ps;
  core::SeededRng init(5, 0);
  policy.init_params(ps, init);
  envs::EnvSpec env = pm_env(0.01);

  SUBCASE("range 0") {
    RolloutBatch batch = ppo::collect(policy, ps, env, tiny_ppo(0.0), 7, 0);
    for (const EpisodeRollout& ep : batch.episodes) {
      CHECK(ep.dynamics.values == env.dynamics.base);
    }
  }
  SUBCASE("fixed seed gives identical batches") {
    RolloutBatch a = ppo::collect(policy, ps, env, tiny_ppo(), 7, 3);
    RolloutBatch b = ppo::collect(policy, ps, env, tiny_ppo(), 7, 3);
    REQUIRE(a.episodes.size() == b.episodes.size());
    for (std::size_t e = 0; e < a.episodes.size(); ++e) {
      CHECK(a.episodes[e].dynamics.values == b.episodes[e].dynamics.values);
      CHECK(a.episodes[e].actions == b.episodes[e].actions);
      CHECK(a.episodes[e].rewards == b.episodes[e].rewards);
      CHECK(a.episodes[e].log_probs == b.episodes[e].log_probs);
    }
  }
  SUBCASE("eta fixed within an episode, resampled across episodes") {
    RolloutBatch batch = ppo::collect(policy, ps, env, tiny_ppo(0.3), 7, 1);
    bool any_differ = false;
    for (std::size_t e = 0; e + 1 < batch.episodes.size(); ++e) {
      any_differ |= batch.episodes[e].dynamics.values !=
                    batch.episodes[e + 1].dynamics.values;
    }
    CHECK(any_differ);
    for (const EpisodeRollout& ep : batch.episodes) {
      const Vec expect = ppo::make_dyn_cond(ep.dynamics, {}, false);
      CHECK(ep.dyn_cond == expect);  // one conditioning vector per episode
    }
  }
}

TEST_CASE("collected eta tags are uniform over the interval (KS test)") {
  dcp::DynamicsConditionedPolicy policy(tiny_policy_config());
  ParamStore ps;
  core::SeededRng init(5, 0);
  policy.init_params(ps, init);
  envs::EnvSpec env = pm_env(0.0, /*horizon=*/1);
  PpoConfig cfg = tiny_ppo(0.3);
  cfg.episodes_per_iter = 1000;

  RolloutBatch batch = ppo::collect(policy, ps, env, cfg, 99, 0);
  for (std::size_t j = 0; j < 2; ++j) {
    Vec samples;
    for (const EpisodeRollout& ep : batch.episodes) {
      samples.push_back(ep.dynamics.values[j]);
    }
    const double b = env.dynamics.base[j];
    const double p = oracles::ks_uniform_pvalue(samples, 0.7 * b, 1.3 * b);
    CHECK(p > 0.01);
  }
}

TEST_CASE("update: zero signal and zero coefficients change nothing") {
  dcp::PolicyConfig pc = tiny_policy_config();
  pc.w_inv = 0.0;
  pc.w_rec = 0.0;
  dcp::DynamicsConditionedPolicy policy(pc);
  ParamStore ps;
  core::SeededRng init(9, 0);
  policy.init_params(ps, init);
  core::SeededRng rng(10, 0);
  RolloutBatch batch = toy_batch(policy, ps, rng, 2, 5, /*zero_signal=*/true);

  PpoConfig cfg = tiny_ppo();
  cfg.value_coef = 0.0;
  cfg.entropy_coef = 0.0;
  const std::uint64_t before = ps.checksum();
  ppo::update(policy, ps, batch, cfg);
  CHECK(ps.checksum() == before);
}

TEST_CASE("update: first-epoch ratio is exactly 1 so surrogate is -mean(adv)") {
  dcp::DynamicsConditionedPolicy policy(tiny_policy_config());
  ParamStore ps;
  core::SeededRng init(11, 0);
  policy.init_params(ps, init);
  core::SeededRng rng(12, 0);
  RolloutBatch batch = toy_batch(policy, ps, rng);

  PpoConfig cfg = tiny_ppo();
  cfg.epochs_per_batch = 1;
  ppo::UpdateReport rep = ppo::update(policy, ps, batch, cfg);
  // normalized advantages have mean zero, and with ratio 1 the clip is
  // inactive, so the reported surrogate collapses to -mean(adv) = 0
  CHECK(std::abs(rep.surrogate) < 1e-9);
}

TEST_CASE("update loss gradient matches finite differences on a toy batch") {
  dcp::DynamicsConditionedPolicy policy(tiny_policy_config());
  ParamStore ps;
  core::SeededRng init(13, 0);
  policy.init_params(ps, init);
  core::SeededRng rng(14, 0);
  RolloutBatch batch = toy_batch(policy, ps, rng, 2, 5);

  PpoConfig cfg = tiny_ppo();
  cfg.entropy_coef = 0.01;

  std::vector<GaeResult> gaes;
  Vec all;
  for (const EpisodeRollout& ep : batch.episodes) {
    gaes.push_back(ppo::gae(ep.rewards, ep.values, ep.bootstrap_value,
                            cfg.gamma, cfg.lam));
    all.insert(all.end(), gaes.back().advantages.begin(),
               gaes.back().advantages.end());
  }
  ppo::normalize_advantages(all);
  std::size_t at = 0;
  for (GaeResult& g : gaes) {
    for (double& a : g.advantages) a = all[at++];
  }
  const double inv_n = 1.0 / batch.total_steps;

  auto loss_value = [&] {
    double total = 0.0;
    for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
      Tape tape(ps);
      total += tape.scalar(ppo::episode_loss_node(policy, tape, batch.episodes[e],
                                                  gaes[e], cfg, inv_n));
    }
    return total;
  };

  Vec grads(static_cast<std::size_t>(ps.total()), 0.0);
  for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
    Tape tape(ps);
    tape.backward(ppo::episode_loss_node(policy, tape, batch.episodes[e], gaes[e],
                                         cfg, inv_n));
    for (std::size_t i = 0; i < grads.size(); ++i) {
      grads[i] += tape.param_grads()[i];
    }
  }

  Vec fd = oracles::finite_diff_grad(ps, loss_value);
  for (int i = 0; i < ps.total(); ++i) {
    CHECK(oracles::rel_err(grads[static_cast<std::size_t>(i)],
                           fd[static_cast<std::size_t>(i)]) < 1e-4);
  }
}

TEST_CASE("update aborts on non-finite input, parameters untouched") {
  dcp::DynamicsConditionedPolicy policy(tiny_policy_config());
  ParamStore ps;
  core::SeededRng init(15, 0);
  policy.init_params(ps, init);
  core::SeededRng rng(16, 0);
  RolloutBatch batch = toy_batch(policy, ps, rng);
  batch.episodes[0].rewards[2] = std::numeric_limits<double>::quiet_NaN();

  const Vec before = ps.data();
  CHECK_THROWS_AS(ppo::update(policy, ps, batch, tiny_ppo()), ppo::UpdateError);
  CHECK(ps.data() == before);
}

TEST_CASE("update keeps parameters finite over repeated steps") {
  dcp::DynamicsConditionedPolicy policy(tiny_policy_config());
  ParamStore ps;
  core::SeededRng init(17, 0);
  policy.init_params(ps, init);
  envs::EnvSpec env = pm_env(0.01);
  PpoConfig cfg = tiny_ppo();
  for (int iter = 0; iter < 10; ++iter) {
    RolloutBatch batch = ppo::collect(policy, ps, env, cfg, 21, iter);
    ppo::update(policy, ps, batch, cfg);
    for (double v : ps.data()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("train: K=0 returns the initial checkpoint and an empty curve") {
  dcp::DynamicsConditionedPolicy policy(tiny_policy_config());
  PpoConfig cfg = tiny_ppo();
  cfg.iterations = 0;
  ppo::TrainResult res = ppo::train(policy, pm_env(), cfg, 33);
  CHECK(res.curve.empty());

  ParamStore expected;
  core::SeededRng init = core::derive_stream(33, core::streams::kParamInit);
  policy.init_params(expected, init);
  CHECK(res.params.data() == expected.data());
}

TEST_CASE("train: curve length equals the iteration budget") {
  dcp::DynamicsConditionedPolicy policy(tiny_policy_config());
  PpoConfig cfg = tiny_ppo();
  cfg.iterations = 3;
  ppo::TrainResult res = ppo::train(policy, pm_env(), cfg, 33);
  CHECK(res.curve.size() == 3);
  for (const auto& s : res.curve) CHECK(std::isfinite(s.mean_reward));
}

TEST_CASE("train: learning progress on fixed-dynamics point mass") {
  // seed-averaged over 3 seeds: final-50-iteration mean reward beats the
  // first-50-iteration mean
  double first_half = 0.0, second_half = 0.0;
  for (std::uint64_t seed : {101ULL, 102ULL, 103ULL}) {
    dcp::PolicyConfig pc = tiny_policy_config();
    pc.h_obs = 8;
    pc.hidden = {16, 16};
    dcp::DynamicsConditionedPolicy policy(pc);
    envs::EnvSpec env = pm_env(0.0, /*horizon=*/60);
    PpoConfig cfg;
    cfg.range_frac = 0.0;
    cfg.episodes_per_iter = 8;
    cfg.iterations = 100;
    cfg.lr = 5e-3;
    ppo::TrainResult res = ppo::train(policy, env, cfg, seed);
    for (int i = 0; i < 50; ++i) first_half += res.curve[static_cast<std::size_t>(i)].mean_reward;
    for (int i = 50; i < 100; ++i) second_half += res.curve[static_cast<std::size_t>(i)].mean_reward;
  }
  CHECK(second_half / 150.0 > first_half / 150.0);
}
