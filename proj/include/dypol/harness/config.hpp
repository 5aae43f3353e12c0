#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dypol/envs/env.hpp"
#include "dypol/harness/toml.hpp"
#include "dypol/ppo/trainer.hpp"
#include "dypol/sysid/trainer.hpp"

namespace dypol::harness {

struct SysidConfig {
  int T = 50;
  std::vector<int> hidden = {64, 64};
  int eps_samples = 4;
  double v = 0.0;  // 0: use the environment's noise_std, else 0.05
  double lr = 2e-4;
  int steps = 2000;
  double grad_clip = 10.0;
  double prior_f0 = 0.0;
  double prior_g0 = 0.3;
  bool train_prior = true;
  int n_train_envs = 50;
  int episodes_per_env = 5;

  double likelihood_noise(double env_noise_std) const {
    if (v > 0.0) return v;
    return env_noise_std > 0.0 ? env_noise_std : 0.05;
  }
};

struct EvalConfig {
  int n_test_envs = 50;
  int offpolicy_episodes = 200;
  int episodes_per_env = 20;
  int finetune_episodes = 100;
};

struct AblationFlags {
  bool use_eta_encoding = true;
  double w_inv = 0.1;
  double w_rec = 0.1;
  bool noise_mode = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  envs::EnvSpec env;
  ppo::PpoConfig ppo;
  int policy_h_obs = 16;
  int policy_h_dyn = 8;
  std::vector<int> policy_hidden = {32, 32};
  SysidConfig sysid;
  EvalConfig eval;
  AblationFlags ablation;
  double omega_range = 1.0;

  // dimensionality of the conditioning vector (normalized eta [+ omega])
  int cond_dim() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_toml(const TomlTable& t);

}  // namespace dypol::harness
