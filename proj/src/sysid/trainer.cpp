#include "dypol/sysid/trainer.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "dypol/diffnum/sgd.hpp"

namespace dypol::sysid {

using diffnum::ParamStore;
using diffnum::Tape;

SysidTrainResult train_sysid(const EstimatorModel& model,
                             const std::vector<std::vector<core::Chunk>>& env_datasets,
                             const SysidTrainConfig& cfg, std::uint64_t seed) {
  SysidTrainResult result;
  core::SeededRng init_rng = core::derive_stream(seed, core::streams::kParamInit, 1);
  model.init_params(result.params, init_rng, cfg.prior_f0, cfg.prior_g0);

  std::vector<PreparedDataset> prepared;
  for (std::size_t e = 0; e < env_datasets.size(); ++e) {
    if (env_datasets[e].empty()) {
      std::cerr << "train_sysid: environment " << e
                << " has no complete chunks, skipping\n";
      continue;
    }
    prepared.push_back(prepare_dataset(model, env_datasets[e]));
  }
  if (prepared.empty()) {
    throw std::runtime_error("train_sysid: no environment has chunks");
  }

  core::SeededRng order_rng = core::derive_stream(seed, core::streams::kSysidOrder);
  core::SeededRng eps_rng = core::derive_stream(seed, core::streams::kElboEps);

  const int prior_offset = result.params.entry("prior.f0").offset;
  const int prior_len = 2 * model.target_dim();  // f0 then g0_raw, contiguous

  for (int step = 0; step < cfg.steps; ++step) {
    const std::size_t e =
        static_cast<std::size_t>(order_rng.next_u64() % prepared.size());
    Tape tape(result.params);
    Tape::NodeId loss = elbo_loss_node(
        tape, model, prepared[e],
        draw_eps(cfg.eps_samples, model.target_dim(), eps_rng));
    const double loss_value = tape.scalar(loss);
    if (!std::isfinite(loss_value)) {
      throw std::runtime_error("train_sysid: non-finite loss at step " +
                               std::to_string(step));
    }
    tape.backward(loss);
    Vec grads = tape.param_grads();
    if (!model.train_prior) {
      for (int i = 0; i < prior_len; ++i) {
        grads[static_cast<std::size_t>(prior_offset + i)] = 0.0;
      }
    }
    if (cfg.grad_clip > 0.0) diffnum::clip_by_global_norm(grads, cfg.grad_clip);
    diffnum::sgd_step(result.params, grads, cfg.lr);
    result.loss_curve.push_back(loss_value);
  }
  return result;
}

}  // namespace dypol::sysid
