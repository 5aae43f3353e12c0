#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dypol/core/episode_io.hpp"
#include "dypol/dcp/policy.hpp"
#include "dypol/harness/config.hpp"
#include "dypol/sysid/trainer.hpp"

namespace dypol::harness {

// ---------------------------------------------------------------------------
// checkpoint bundles

struct PolicyBundle {
  dcp::DynamicsConditionedPolicy policy;
  diffnum::ParamStore params;
  bool noise_mode = false;
};

void save_policy(const PolicyBundle& bundle, const std::filesystem::path& dir);
PolicyBundle load_policy(const std::filesystem::path& dir);

struct SysidBundle {
  sysid::EstimatorModel model;
  diffnum::ParamStore params;
};

// ---------------------------------------------------------------------------
// off-policy data

// Complete episodes under a uniform-random policy in the given (fully
// instantiated) environment. Actions are uniform in the family's action box.
std::vector<core::Episode> collect_offpolicy_random(const envs::EnvSpec& env,
                                                    int episodes, int env_id,
                                                    std::uint64_t seed,
                                                    std::uint64_t stream_index);

// Same but driven by a pretrained policy conditioned on `dyn_cond`
// (stochastic draws, the "safe pre-trained policy" route).
std::vector<core::Episode> collect_offpolicy_policy(
    const envs::EnvSpec& env, int episodes, int env_id,
    const dcp::DynamicsConditionedPolicy& policy,
    const diffnum::ParamStore& params, const Vec& dyn_cond, std::uint64_t seed,
    std::uint64_t stream_index);

// ---------------------------------------------------------------------------
// training pipelines

dcp::PolicyConfig make_policy_config(const ExperimentConfig& cfg);

// Algorithm-1 style dynamics-randomized PPO training from the config.
PolicyBundle train_policy_pipeline(const ExperimentConfig& cfg, std::uint64_t seed,
                                   const std::optional<std::filesystem::path>& out_dir,
                                   std::vector<ppo::IterStats>* curve = nullptr);

// Samples n_train_envs dynamics draws, collects random-policy episodes in
// each and returns per-env chunked datasets plus the episodes themselves.
struct SysidData {
  std::vector<std::vector<core::Chunk>> chunks;   // per env
  std::vector<std::vector<core::Episode>> episodes;  // per env (labeled)
  std::vector<core::DynamicsVector> dynamics;     // ground truth per env
  std::vector<Vec> omegas;                        // ground truth per env
};

SysidData collect_sysid_data(const ExperimentConfig& cfg, std::uint64_t seed);

SysidBundle train_sysid_pipeline(const ExperimentConfig& cfg, std::uint64_t seed,
                                 const std::optional<std::filesystem::path>& out_dir,
                                 Vec* loss_curve = nullptr);

SysidBundle train_sysid_from_datasets(
    const ExperimentConfig& cfg, const std::vector<std::vector<core::Chunk>>& datasets,
    std::uint64_t seed, Vec* loss_curve = nullptr);

// ---------------------------------------------------------------------------
// evaluation

struct EnvEvalRow {
  int env_index = 0;
  Vec eta_true;        // raw dynamics of the test env
  Vec omega_true;      // motor weights of the test env (may be empty)
  Vec eta_hat;         // raw posterior mean (dynamics dims, then omega dims)
  Vec posterior_std;   // raw posterior std
  Vec abs_err;         // |eta_hat - truth| per estimated dim
  int k_used = 0;
  int n_clamped = 0;
  double reward_mean = 0.0;  // estimated-conditioned (the zero-shot protocol)
  double reward_std = 0.0;
  double zero_shot_reward = 0.0;
  double oracle_reward = 0.0;  // true-eta conditioned, same envs and seeds
  double base_reward = 0.0;    // base-eta conditioned, same envs and seeds
  bool skipped = false;
  std::string error;
};

struct EvalReport {
  std::vector<EnvEvalRow> rows;
  double mean_zero_shot = 0.0;
  double mean_oracle = 0.0;
  double mean_base = 0.0;
  double se_zero_shot = 0.0;  // standard error over env means
  double se_oracle = 0.0;
  double se_base = 0.0;
  double runtime_s = 0.0;
  int n_evaluated = 0;
};

// Algorithm-2 protocol over n_test_envs freshly sampled unseen dynamics:
// collect off-policy data, estimate, execute the policy conditioned on the
// posterior mean with no parameter updates; oracle- and base-conditioned
// rewards are measured on the same envs and episode seeds. No gradient path
// touches either checkpoint.
EvalReport evaluate_zero_shot(const ExperimentConfig& cfg,
                              const PolicyBundle& policy,
                              const SysidBundle& sysid, std::uint64_t seed);

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path);
void write_eval_json(const EvalReport& report, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// fine-tuning (Fig. 5 protocol)

// Continues PPO in one fixed test environment, conditioning on the estimated
// dynamics. curve[0] is the zero-shot reward; one entry per training episode
// follows. episodes == 0 returns an empty curve and leaves params untouched.
struct FinetuneResult {
  Vec curve;
  diffnum::ParamStore params;
};

FinetuneResult finetune(const ExperimentConfig& cfg, const PolicyBundle& policy,
                        const SysidBundle& sysid, const envs::EnvSpec& test_env,
                        int episodes, std::uint64_t seed);

// ---------------------------------------------------------------------------
// experiment suites

struct AblationRow {
  std::string variant;
  double mean_zero_shot = 0.0;
  double std_zero_shot = 0.0;
  int n_seeds = 0;
};

// Returns the five config variants (full regularization, no regularization,
// inverse-dynamics only, reconstruction only, plain domain randomization);
// they differ only in {w_inv, w_rec, use_eta_encoding}.
std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(
    const ExperimentConfig& base);

std::vector<AblationRow> run_ablation_suite(const ExperimentConfig& cfg,
                                            int n_seeds);

struct RangeSweepRow {
  double range = 0.0;
  double full_mean = 0.0, full_std = 0.0;
  double ff_mean = 0.0, ff_std = 0.0;
  int n_seeds = 0;
};

// Full train+eval at each randomization range, training and testing on
// matched ranges.
std::vector<RangeSweepRow> run_range_sweep(const ExperimentConfig& cfg,
                                           const Vec& ranges, int n_seeds);

struct NoiseEvalRow {
  std::string scenario;  // "known" or "unknown"
  double K = 0.0;
  double noise_mean = 0.0, noise_std = 0.0;      // omega inferred + conditioned
  double nonoise_mean = 0.0, nonoise_std = 0.0;  // omega ignored
  double pooled_se = 0.0;
  int n_seeds = 0;
};

std::vector<NoiseEvalRow> run_noise_eval(const ExperimentConfig& cfg,
                                         const Vec& K_values, int n_seeds);

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path);
void write_sweep_csv(const std::vector<RangeSweepRow>& rows,
                     const std::filesystem::path& path);
void write_noise_csv(const std::vector<NoiseEvalRow>& rows,
                     const std::filesystem::path& path);

}  // namespace dypol::harness
