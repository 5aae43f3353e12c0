#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dypol/core/dynamics.hpp"
#include "dypol/core/rng.hpp"
#include "dypol/dcp/policy.hpp"
#include "dypol/diffnum/param_store.hpp"
#include "dypol/envs/env.hpp"
#include "dypol/ppo/gae.hpp"

namespace dypol::ppo {

struct PpoConfig {
  double clip_eps = 0.2;
  double gamma = 0.99;
  double lam = 0.95;
  int epochs_per_batch = 4;
  double lr = 1e-2;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  int episodes_per_iter = 16;
  int n_envs = 1;  // worker pool width; collection is sequential here
  double range_frac = 0.2;
  int iterations = 100;
  double grad_clip = 1.0;
  int checkpoint_every = 0;  // 0: final checkpoint only
  // Motor-noise randomization during collection (sampled per episode when
  // the base env carries a motor block).
  double omega_range = 1.0;
  bool condition_on_omega = false;
};

struct EpisodeRollout {
  std::vector<Vec> obs;   // o_1..o_T
  Vec final_obs;          // o_{T+1}
  std::vector<Vec> actions;
  Vec log_probs;
  Vec rewards;
  Vec values;
  double bootstrap_value = 0.0;
  Vec dyn_cond;           // conditioning vector fed to m_zeta
  core::DynamicsVector dynamics;  // eta sampled at episode start
  Vec omega;              // motor weights sampled at episode start (may be empty)
  double total_reward = 0.0;
};

struct RolloutBatch {
  std::vector<EpisodeRollout> episodes;
  int total_steps = 0;
};

struct UpdateReport {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double inv_loss = 0.0;
  double rec_loss = 0.0;
};

struct IterStats {
  int iter = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double inv_loss = 0.0;
  double rec_loss = 0.0;
};

struct TrainResult {
  diffnum::ParamStore params;
  std::vector<IterStats> curve;
};

// Raised when an update would apply a non-finite loss; parameters are left
// exactly as before the update call.
struct UpdateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Builds the conditioning vector for an episode: normalized dynamics,
// optionally followed by the flattened motor weights.
Vec make_dyn_cond(const core::DynamicsVector& dyn, const Vec& omega,
                  bool condition_on_omega);

// Rolls out `episodes_per_iter` complete episodes, sampling dynamics (and
// motor weights when configured) fresh at each episode start. The policy is
// conditioned on the true sampled dynamics. Per-episode faults abort that
// episode only; the batch is returned if at least one episode succeeded.
RolloutBatch collect(const dcp::DynamicsConditionedPolicy& policy,
                     const diffnum::ParamStore& params,
                     const envs::EnvSpec& env_base, const PpoConfig& cfg,
                     std::uint64_t seed, std::uint64_t iter_index);

// Records one episode's contribution to the PPO objective on the tape:
// -surrogate + value_coef*value MSE - entropy_coef*entropy + aux losses,
// each term scaled by inv_n (1/total batch steps) so episode losses sum to
// batch means. When `acc` is given the components are accumulated into it.
diffnum::Tape::NodeId episode_loss_node(const dcp::DynamicsConditionedPolicy& policy,
                                        diffnum::Tape& tape,
                                        const EpisodeRollout& ep,
                                        const GaeResult& adv, const PpoConfig& cfg,
                                        double inv_n, UpdateReport* acc = nullptr);

// Rollouts in one fixed environment with a fixed conditioning vector
// (fine-tuning in a test environment: dynamics are not resampled).
RolloutBatch collect_fixed(const dcp::DynamicsConditionedPolicy& policy,
                           const diffnum::ParamStore& params,
                           const envs::EnvSpec& env, const Vec& dyn_cond,
                           int episodes, const PpoConfig& cfg,
                           std::uint64_t seed, std::uint64_t iter_index);

// One PPO update over the batch: clipped surrogate + value MSE + entropy
// bonus + auxiliary regularizers, `epochs_per_batch` SGD passes.
UpdateReport update(const dcp::DynamicsConditionedPolicy& policy,
                    diffnum::ParamStore& params, const RolloutBatch& batch,
                    const PpoConfig& cfg);

// Alternates collect/update for cfg.iterations, writing periodic checkpoints
// under out_dir when given.
TrainResult train(const dcp::DynamicsConditionedPolicy& policy,
                  const envs::EnvSpec& env_base, const PpoConfig& cfg,
                  std::uint64_t seed,
                  const std::optional<std::filesystem::path>& out_dir = {});

void write_curve_csv(const std::vector<IterStats>& curve,
                     const std::filesystem::path& path);

}  // namespace dypol::ppo
