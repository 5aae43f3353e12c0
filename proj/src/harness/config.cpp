#include "dypol/harness/config.hpp"

#include <stdexcept>

namespace dypol::harness {

int ExperimentConfig::cond_dim() const {
  const envs::FamilyInfo& info = envs::family_info(env.family);
  int d = info.dyn_dim;
  if (ablation.noise_mode && env.motor) d += info.act_dim * env.motor->d_phi;
  return d;
}

ExperimentConfig config_from_toml(const TomlTable& t) {
  ExperimentConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(t.get_int("seed", 1));

  cfg.env.family = envs::family_from_string(t.get_string("env.family"));
  const envs::FamilyInfo& info = envs::family_info(cfg.env.family);
  cfg.env.dynamics.base = t.get_double_array("env.base", info.base_dynamics);
  if (static_cast<int>(cfg.env.dynamics.base.size()) != info.dyn_dim) {
    throw std::runtime_error("config: env.base must have " +
                             std::to_string(info.dyn_dim) + " entries for " +
                             info.name);
  }
  cfg.env.dynamics.values = cfg.env.dynamics.base;
  cfg.env.dynamics.range_frac = t.get_double("env.range_frac", 0.2);
  cfg.env.noise_std = t.get_double("env.v", 0.01);
  cfg.env.dt = t.get_double("env.dt", 0.05);
  cfg.env.horizon = static_cast<int>(t.get_int("env.horizon", 200));
  cfg.env.init_spread = t.get_double("env.init_spread", 1.0);
  cfg.env.seed = cfg.seed;
  cfg.env.dynamics.validate();
  if (cfg.env.horizon < 1) throw std::runtime_error("config: horizon must be >= 1");

  if (t.has("env.motor.tau_seed") || t.has("env.motor.K")) {
    envs::MotorNoiseSpec motor;
    motor.tau_seed = static_cast<std::uint64_t>(t.get_int("env.motor.tau_seed", 7));
    motor.d_phi = static_cast<int>(t.get_int("env.motor.d_phi", 4));
    motor.K = t.get_double("env.motor.K", 0.0);
    cfg.env.motor = motor;
  }
  cfg.omega_range = t.get_double("env.motor.omega_range", 1.0);

  cfg.ppo.clip_eps = t.get_double("ppo.clip_eps", 0.2);
  cfg.ppo.gamma = t.get_double("ppo.gamma", 0.99);
  cfg.ppo.lam = t.get_double("ppo.lam", 0.95);
  cfg.ppo.epochs_per_batch = static_cast<int>(t.get_int("ppo.epochs_per_batch", 4));
  cfg.ppo.lr = t.get_double("ppo.lr", 1e-2);
  cfg.ppo.value_coef = t.get_double("ppo.value_coef", 0.5);
  cfg.ppo.entropy_coef = t.get_double("ppo.entropy_coef", 0.0);
  cfg.ppo.episodes_per_iter = static_cast<int>(t.get_int("ppo.episodes_per_iter", 16));
  cfg.ppo.n_envs = static_cast<int>(t.get_int("ppo.n_envs", 1));
  cfg.ppo.range_frac = cfg.env.dynamics.range_frac;
  cfg.ppo.iterations = static_cast<int>(t.get_int("ppo.iterations", 100));
  cfg.ppo.grad_clip = t.get_double("ppo.grad_clip", 1.0);
  cfg.ppo.checkpoint_every = static_cast<int>(t.get_int("ppo.checkpoint_every", 0));
  cfg.ppo.omega_range = cfg.omega_range;
  if (!(cfg.ppo.gamma > 0.0 && cfg.ppo.gamma <= 1.0)) {
    throw std::runtime_error("config: ppo.gamma must be in (0,1]");
  }
  if (cfg.ppo.lam < 0.0 || cfg.ppo.lam > 1.0) {
    throw std::runtime_error("config: ppo.lam must be in [0,1]");
  }
  if (!(cfg.ppo.clip_eps > 0.0)) {
    throw std::runtime_error("config: ppo.clip_eps must be > 0");
  }

  cfg.policy_h_obs = static_cast<int>(t.get_int("ppo.h_obs", 16));
  cfg.policy_h_dyn = static_cast<int>(t.get_int("ppo.h_dyn", 8));
  cfg.policy_hidden = t.get_int_array("ppo.hidden", {32, 32});

  cfg.sysid.T = static_cast<int>(t.get_int("sysid.T", 50));
  cfg.sysid.hidden = t.get_int_array("sysid.hidden", {64, 64});
  cfg.sysid.eps_samples = static_cast<int>(t.get_int("sysid.eps_samples", 4));
  cfg.sysid.v = t.get_double("sysid.v", 0.0);
  cfg.sysid.lr = t.get_double("sysid.lr", 2e-4);
  cfg.sysid.steps = static_cast<int>(t.get_int("sysid.steps", 2000));
  cfg.sysid.grad_clip = t.get_double("sysid.grad_clip", 10.0);
  cfg.sysid.prior_f0 = t.get_double("sysid.prior_f0", 0.0);
  cfg.sysid.prior_g0 = t.get_double("sysid.prior_g0", 0.3);
  cfg.sysid.train_prior = t.get_bool("sysid.train_prior", true);
  cfg.sysid.n_train_envs = static_cast<int>(t.get_int("sysid.n_train_envs", 50));
  cfg.sysid.episodes_per_env = static_cast<int>(t.get_int("sysid.episodes_per_env", 5));

  cfg.eval.n_test_envs = static_cast<int>(t.get_int("eval.n_test_envs", 50));
  cfg.eval.offpolicy_episodes =
      static_cast<int>(t.get_int("eval.offpolicy_episodes", 200));
  cfg.eval.episodes_per_env = static_cast<int>(t.get_int("eval.episodes_per_env", 20));
  cfg.eval.finetune_episodes =
      static_cast<int>(t.get_int("eval.finetune_episodes", 100));
  if (cfg.eval.offpolicy_episodes < 1) {
    throw std::runtime_error("config: eval.offpolicy_episodes must be >= 1");
  }

  cfg.ablation.use_eta_encoding = t.get_bool("ablation.use_eta_encoding", true);
  cfg.ablation.w_inv = t.get_double("ablation.w_inv", 0.1);
  cfg.ablation.w_rec = t.get_double("ablation.w_rec", 0.1);
  cfg.ablation.noise_mode = t.get_bool("ablation.noise_mode", false);
  if (cfg.ablation.w_inv < 0.0 || cfg.ablation.w_rec < 0.0) {
    throw std::runtime_error("config: ablation weights must be >= 0");
  }
  if (cfg.ablation.noise_mode && !cfg.env.motor) {
    throw std::runtime_error("config: noise_mode requires an env.motor block");
  }

  cfg.ppo.condition_on_omega = cfg.ablation.noise_mode;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_toml(TomlTable::parse_file(path));
}

}  // namespace dypol::harness
