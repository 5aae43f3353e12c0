#pragma once

#include <vector>

#include "dypol/sysid/estimator.hpp"

namespace dypol::sysid {

struct SysidTrainConfig {
  int steps = 2000;
  double lr = 2e-4;
  int eps_samples = 4;
  double grad_clip = 10.0;
  double prior_f0 = 0.0;
  double prior_g0 = 0.3;
};

struct SysidTrainResult {
  diffnum::ParamStore params;
  Vec loss_curve;  // one entry per SGD step
};

// Stochastic variational training: each step picks one environment's chunk
// set and descends the negative ELBO. Environments with zero chunks are
// skipped with a warning. Ground-truth dynamics labels are not consumed by
// the loss; they stay with the datasets for evaluation.
SysidTrainResult train_sysid(const EstimatorModel& model,
                             const std::vector<std::vector<core::Chunk>>& env_datasets,
                             const SysidTrainConfig& cfg, std::uint64_t seed);

}  // namespace dypol::sysid
