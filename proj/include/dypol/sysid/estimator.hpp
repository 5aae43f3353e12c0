#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dypol/core/dynamics.hpp"
#include "dypol/core/rng.hpp"
#include "dypol/core/types.hpp"
#include "dypol/diffnum/mlp.hpp"
#include "dypol/diffnum/param_store.hpp"
#include "dypol/diffnum/tape.hpp"
#include "dypol/envs/env.hpp"

namespace dypol::sysid {

struct PriorParams {
  Vec f0;
  Vec g0;  // strictly positive
};

struct PosteriorEstimate {
  core::DiagGaussian posterior;
  int k_used = 0;
  std::vector<int> clamped_dims;  // dims where the precision floor fired
};

// Combines per-chunk Gaussian posteriors in precision space, subtracting the
// (k-1) extra prior factors:
//   prec_j = sum_i sigma_ij^-2 - (k-1) g0_j^-2   (floored at 1e-6)
//   mu_j   = var_j * (sum_i mu_ij/sigma_ij^2 - (k-1) f0_j/g0_j^2)
// k = 1 returns the single elemental unchanged (the formula degenerates).
PosteriorEstimate aggregate(const std::vector<core::DiagGaussian>& elementals,
                            const PriorParams& prior);

// mu + sigma*eps elementwise.
Vec reparam_sample(const core::DiagGaussian& posterior, const Vec& eps);

// Exact diagonal-Gaussian KL(posterior || prior):
//   sum_j [ ((mu_j-f0_j)^2 + sigma_j^2) / (2 g0_j^2) + ln(g0_j/sigma_j) - 1/2 ]
double kl_to_prior(const core::DiagGaussian& posterior, const PriorParams& prior);

// The elemental estimator network plus everything needed to evaluate the
// forward dynamics model it is trained against. The estimator works in
// normalized dynamics space (fractional deviation from base); motor-noise
// weights, when estimated, pass through unscaled.
struct EstimatorModel {
  envs::Family family = envs::Family::kPointMass1d;
  Vec base;  // raw dynamics base values
  int obs_dim = 0;
  int act_dim = 0;
  int T = 50;
  int n_omega = 0;  // act_dim * d_phi in noise mode, else 0
  bool noise_mode = false;
  std::uint64_t tau_seed = 0;
  int d_phi = 0;
  double K = 0.0;
  double dt = 0.05;
  double v = 0.05;  // likelihood noise std
  bool train_prior = true;
  diffnum::MlpSpec elemental;

  int dyn_dim() const { return static_cast<int>(base.size()); }
  int target_dim() const { return dyn_dim() + n_omega; }
  int chunk_input_dim() const { return T * (2 * obs_dim + act_dim); }

  static EstimatorModel create(const envs::EnvSpec& env, int T,
                               const std::vector<int>& hidden, bool noise_mode,
                               double v, bool train_prior);

  // Registers "elemental.*", "prior.f0" and "prior.g0_raw".
  void init_params(diffnum::ParamStore& params, core::SeededRng& rng,
                   double f0_init, double g0_init) const;

  PriorParams prior(const diffnum::ParamStore& params) const;

  // Per-dimension Gaussian for one chunk; deterministic in (params, chunk).
  core::DiagGaussian elemental_posterior(const diffnum::ParamStore& params,
                                         const core::Chunk& chunk) const;

  // Chunks every episode, runs the elemental estimator on each chunk and
  // aggregates. Normalized-space posterior; throws when no complete chunk
  // of length T exists.
  PosteriorEstimate estimate(const diffnum::ParamStore& params,
                             const std::vector<core::Episode>& episodes) const;

  // Same, rescaled to raw dynamics units (omega dims pass through).
  PosteriorEstimate estimate_raw(const diffnum::ParamStore& params,
                                 const std::vector<core::Episode>& episodes) const;

  Vec chunk_input(const core::Chunk& chunk) const;

  void save(const std::filesystem::path& dir,
            const diffnum::ParamStore& params) const;
  static EstimatorModel load(const std::filesystem::path& dir,
                             diffnum::ParamStore* params);
};

// Transition-level view of a per-environment dataset, with the motor-noise
// basis precomputed. Built once, reused across loss evaluations.
struct PreparedDataset {
  std::vector<Vec> obs;
  std::vector<Vec> act_clipped;
  std::vector<Vec> next_obs;
  std::vector<Vec> phi;  // Phi_tau(obs), noise mode only
  std::vector<core::Chunk> chunks;
};

PreparedDataset prepare_dataset(const EstimatorModel& model,
                                const std::vector<core::Chunk>& chunks);

// Negative evidence lower bound for one environment's chunk set:
//   (1/(2 v^2)) * mean_eps[ sum_chunks sum_t |o' - F(o, a; eta_hat(eps))|^2 ]
//   + KL(aggregate(...) || prior)
// recorded on the tape; gradients reach the estimator and prior parameters
// through the aggregation, the reparameterization and the analytic dynamics
// Jacobians.
diffnum::Tape::NodeId elbo_loss_node(diffnum::Tape& tape,
                                     const EstimatorModel& model,
                                     const PreparedDataset& data,
                                     const std::vector<Vec>& eps_draws);

// Convenience wrapper: draws eps_samples standard-normal vectors from rng
// and evaluates the loss (no gradient kept).
double elbo_loss(const diffnum::ParamStore& params, const EstimatorModel& model,
                 const std::vector<core::Chunk>& chunks, int eps_samples,
                 core::SeededRng& rng);

std::vector<Vec> draw_eps(int eps_samples, int dim, core::SeededRng& rng);

}  // namespace dypol::sysid
