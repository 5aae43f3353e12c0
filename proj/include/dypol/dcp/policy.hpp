#pragma once

#include <span>
#include <string>
#include <vector>

#include "dypol/core/rng.hpp"
#include "dypol/core/types.hpp"
#include "dypol/diffnum/mlp.hpp"
#include "dypol/diffnum/param_store.hpp"
#include "dypol/diffnum/tape.hpp"

namespace dypol::dcp {

struct PolicyConfig {
  int obs_dim = 0;
  int act_dim = 0;
  int dyn_dim = 0;   // conditioning vector length (normalized dynamics [+ omega])
  int h_obs = 16;    // observation latent width
  int h_dyn = 8;     // dynamics latent width
  std::vector<int> hidden = {64, 64};
  bool use_dyn_encoding = true;
  double std_floor = 1e-4;
  double w_inv = 0.1;
  double w_rec = 0.1;

  int latent_dim() const { return h_obs + (use_dyn_encoding ? h_dyn : 0); }
};

struct LatentState {
  Vec z_obs;
  Vec z_dyn;
  Vec z;  // concat(z_obs, z_dyn)
};

struct ActionDistribution {
  Vec mean;
  Vec std;
};

// Per-step record used by the auxiliary losses.
struct AuxBatchItem {
  Vec obs;
  Vec next_obs;
  Vec action;
  Vec dyn;  // conditioning vector
};

// Observation encoder f_phi, dynamics encoder m_zeta, Gaussian action head
// g_theta, inverse-dynamics head g_inv, reconstruction head f_rec, and the
// value head, all over one ParamStore. Checkpoint entries are named
// "f_phi.*", "m_zeta.*", "g_theta.*", "g_inv.*", "f_rec.*", "value.*".
class DynamicsConditionedPolicy {
 public:
  DynamicsConditionedPolicy(PolicyConfig cfg);

  void init_params(diffnum::ParamStore& params, core::SeededRng& rng) const;

  const PolicyConfig& config() const { return cfg_; }

  // Plain (inference-time) paths.
  LatentState encode(const diffnum::ParamStore& params, const Vec& obs,
                     const Vec& dyn_normalized) const;
  Vec encode_dyn(const diffnum::ParamStore& params, const Vec& dyn_normalized) const;
  Vec encode_obs(const diffnum::ParamStore& params, const Vec& obs) const;
  ActionDistribution policy_forward(const diffnum::ParamStore& params,
                                    const LatentState& z) const;
  double value(const diffnum::ParamStore& params, const LatentState& z) const;
  double inverse_dynamics_loss(const diffnum::ParamStore& params, const Vec& z_t,
                               const Vec& z_next, const Vec& action) const;
  double reconstruction_loss(const diffnum::ParamStore& params, const Vec& obs) const;
  // w_inv * mean(L_inv) + w_rec * mean(L_rec) over the batch.
  double aux_loss(const diffnum::ParamStore& params,
                  const std::vector<AuxBatchItem>& batch, double w_inv,
                  double w_rec) const;

  // Tape-recorded paths (training).
  diffnum::Tape::NodeId encode_obs_node(diffnum::Tape& tape, const Vec& obs) const;
  diffnum::Tape::NodeId encode_dyn_node(diffnum::Tape& tape, const Vec& dyn) const;
  diffnum::Tape::NodeId latent_node(diffnum::Tape& tape, diffnum::Tape::NodeId z_obs,
                                    diffnum::Tape::NodeId z_dyn) const;
  // returns (mean node, std node)
  std::pair<diffnum::Tape::NodeId, diffnum::Tape::NodeId> policy_nodes(
      diffnum::Tape& tape, diffnum::Tape::NodeId z) const;
  diffnum::Tape::NodeId value_node(diffnum::Tape& tape, diffnum::Tape::NodeId z) const;
  // Gaussian log-density of a fixed action under (mean, std) nodes.
  diffnum::Tape::NodeId log_prob_node(diffnum::Tape& tape, diffnum::Tape::NodeId mean,
                                      diffnum::Tape::NodeId std, const Vec& action) const;
  diffnum::Tape::NodeId entropy_node(diffnum::Tape& tape, diffnum::Tape::NodeId std) const;
  diffnum::Tape::NodeId inv_loss_node(diffnum::Tape& tape, diffnum::Tape::NodeId z_t,
                                      diffnum::Tape::NodeId z_next, const Vec& action) const;
  diffnum::Tape::NodeId rec_loss_node(diffnum::Tape& tape, diffnum::Tape::NodeId z_obs,
                                      const Vec& obs) const;

  const diffnum::MlpSpec& f_phi() const { return f_phi_; }
  const diffnum::MlpSpec& m_zeta() const { return m_zeta_; }
  const diffnum::MlpSpec& g_theta() const { return g_theta_; }

 private:
  PolicyConfig cfg_;
  diffnum::MlpSpec f_phi_;
  diffnum::MlpSpec m_zeta_;
  diffnum::MlpSpec g_theta_;
  diffnum::MlpSpec g_inv_;
  diffnum::MlpSpec f_rec_;
  diffnum::MlpSpec value_;
};

// action = mean + std*eps with eps ~ N(0, I); returns the exact diagonal
// Gaussian log density of the draw.
std::pair<Vec, double> sample_action(const ActionDistribution& dist,
                                     core::SeededRng& rng);

double log_prob(const ActionDistribution& dist, const Vec& action);

}  // namespace dypol::dcp
