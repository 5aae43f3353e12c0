#include "dypol/dcp/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace dypol::dcp {

using diffnum::Activation;
using diffnum::MlpSpec;
using diffnum::OutputTransform;
using diffnum::ParamStore;
using diffnum::Tape;

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;

MlpSpec make_spec(int in, const std::vector<int>& hidden, int out,
                  OutputTransform transform = OutputTransform::kIdentity,
                  int tail = 0, double floor = 1e-4) {
  MlpSpec s;
  s.widths.push_back(in);
  for (int h : hidden) s.widths.push_back(h);
  s.widths.push_back(out);
  s.output = transform;
  s.tail_len = tail;
  s.tail_floor = floor;
  return s;
}
}  // namespace

DynamicsConditionedPolicy::DynamicsConditionedPolicy(PolicyConfig cfg)
    : cfg_(cfg) {
  if (cfg_.obs_dim < 1 || cfg_.act_dim < 1) {
    throw std::invalid_argument("PolicyConfig: obs/act dims required");
  }
  if (cfg_.use_dyn_encoding && cfg_.dyn_dim < 1) {
    throw std::invalid_argument("PolicyConfig: dyn_dim required with encoding");
  }
  f_phi_ = make_spec(cfg_.obs_dim, cfg_.hidden, cfg_.h_obs);
  if (cfg_.use_dyn_encoding) {
    m_zeta_ = make_spec(cfg_.dyn_dim, cfg_.hidden, cfg_.h_dyn);
  }
  const int zdim = cfg_.latent_dim();
  g_theta_ = make_spec(zdim, cfg_.hidden, 2 * cfg_.act_dim,
                       OutputTransform::kSoftplusTail, cfg_.act_dim,
                       cfg_.std_floor);
  g_inv_ = make_spec(2 * zdim, cfg_.hidden, cfg_.act_dim);
  f_rec_ = make_spec(cfg_.h_obs, cfg_.hidden, cfg_.obs_dim);
  value_ = make_spec(zdim, cfg_.hidden, 1);
}

void DynamicsConditionedPolicy::init_params(ParamStore& params,
                                            core::SeededRng& rng) const {
  diffnum::mlp_init(params, f_phi_, "f_phi", rng);
  if (cfg_.use_dyn_encoding) diffnum::mlp_init(params, m_zeta_, "m_zeta", rng);
  diffnum::mlp_init(params, g_theta_, "g_theta", rng);
  diffnum::mlp_init(params, g_inv_, "g_inv", rng);
  diffnum::mlp_init(params, f_rec_, "f_rec", rng);
  diffnum::mlp_init(params, value_, "value", rng);
}

Vec DynamicsConditionedPolicy::encode_obs(const ParamStore& params,
                                          const Vec& obs) const {
  return diffnum::mlp_eval(f_phi_, params, obs, "f_phi");
}

Vec DynamicsConditionedPolicy::encode_dyn(const ParamStore& params,
                                          const Vec& dyn_normalized) const {
  if (!cfg_.use_dyn_encoding) return {};
  return diffnum::mlp_eval(m_zeta_, params, dyn_normalized, "m_zeta");
}

LatentState DynamicsConditionedPolicy::encode(const ParamStore& params,
                                              const Vec& obs,
                                              const Vec& dyn_normalized) const {
  LatentState z;
  z.z_obs = encode_obs(params, obs);
  z.z_dyn = encode_dyn(params, dyn_normalized);
  z.z = z.z_obs;
  z.z.insert(z.z.end(), z.z_dyn.begin(), z.z_dyn.end());
  return z;
}

ActionDistribution DynamicsConditionedPolicy::policy_forward(
    const ParamStore& params, const LatentState& z) const {
  Vec out = diffnum::mlp_eval(g_theta_, params, z.z, "g_theta");
  ActionDistribution dist;
  dist.mean.assign(out.begin(), out.begin() + cfg_.act_dim);
  dist.std.assign(out.begin() + cfg_.act_dim, out.end());
  return dist;
}

double DynamicsConditionedPolicy::value(const ParamStore& params,
                                        const LatentState& z) const {
  return diffnum::mlp_eval(value_, params, z.z, "value")[0];
}

double DynamicsConditionedPolicy::inverse_dynamics_loss(const ParamStore& params,
                                                        const Vec& z_t,
                                                        const Vec& z_next,
                                                        const Vec& action) const {
  Vec in = z_next;
  in.insert(in.end(), z_t.begin(), z_t.end());
  const Vec pred = diffnum::mlp_eval(g_inv_, params, in, "g_inv");
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - action[i];
    loss += r * r;
  }
  return loss;
}

double DynamicsConditionedPolicy::reconstruction_loss(const ParamStore& params,
                                                      const Vec& obs) const {
  const Vec z_obs = encode_obs(params, obs);
  const Vec rec = diffnum::mlp_eval(f_rec_, params, z_obs, "f_rec");
  double loss = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double r = rec[i] - obs[i];
    loss += r * r;
  }
  return loss;
}

double DynamicsConditionedPolicy::aux_loss(const ParamStore& params,
                                           const std::vector<AuxBatchItem>& batch,
                                           double w_inv, double w_rec) const {
  if (w_inv < 0.0 || w_rec < 0.0) {
    throw std::invalid_argument("aux_loss: negative weight");
  }
  if (batch.empty() || (w_inv == 0.0 && w_rec == 0.0)) return 0.0;
  double inv_acc = 0.0;
  double rec_acc = 0.0;
  for (const AuxBatchItem& item : batch) {
    if (w_inv > 0.0) {
      const LatentState z_t = encode(params, item.obs, item.dyn);
      const LatentState z_next = encode(params, item.next_obs, item.dyn);
      inv_acc += inverse_dynamics_loss(params, z_t.z, z_next.z, item.action);
    }
    if (w_rec > 0.0) rec_acc += reconstruction_loss(params, item.obs);
  }
  const double n = static_cast<double>(batch.size());
  return w_inv * inv_acc / n + w_rec * rec_acc / n;
}

Tape::NodeId DynamicsConditionedPolicy::encode_obs_node(Tape& tape,
                                                        const Vec& obs) const {
  return diffnum::mlp_forward(tape, f_phi_, "f_phi", tape.input(obs));
}

Tape::NodeId DynamicsConditionedPolicy::encode_dyn_node(Tape& tape,
                                                        const Vec& dyn) const {
  if (!cfg_.use_dyn_encoding) {
    throw std::logic_error("encode_dyn_node: dynamics encoding disabled");
  }
  return diffnum::mlp_forward(tape, m_zeta_, "m_zeta", tape.input(dyn));
}

Tape::NodeId DynamicsConditionedPolicy::latent_node(Tape& tape, Tape::NodeId z_obs,
                                                    Tape::NodeId z_dyn) const {
  if (!cfg_.use_dyn_encoding) return z_obs;
  return tape.concat(z_obs, z_dyn);
}

std::pair<Tape::NodeId, Tape::NodeId> DynamicsConditionedPolicy::policy_nodes(
    Tape& tape, Tape::NodeId z) const {
  Tape::NodeId out = diffnum::mlp_forward(tape, g_theta_, "g_theta", z);
  return {tape.slice(out, 0, cfg_.act_dim),
          tape.slice(out, cfg_.act_dim, cfg_.act_dim)};
}

Tape::NodeId DynamicsConditionedPolicy::value_node(Tape& tape,
                                                   Tape::NodeId z) const {
  return diffnum::mlp_forward(tape, value_, "value", z);
}

Tape::NodeId DynamicsConditionedPolicy::log_prob_node(Tape& tape,
                                                      Tape::NodeId mean,
                                                      Tape::NodeId std,
                                                      const Vec& action) const {
  // sum_i [ -log std_i - 0.5 log 2pi - (a_i - m_i)^2 / (2 std_i^2) ]
  Tape::NodeId a = tape.input(action);
  Tape::NodeId diff = tape.sub(a, mean);
  Tape::NodeId quad =
      tape.mul(tape.square(diff), tape.recip(tape.square(std)));
  Tape::NodeId terms = tape.add_const(
      tape.add(tape.log_op(std), tape.scale(quad, 0.5)), 0.5 * kLogTwoPi);
  return tape.neg(tape.sum(terms));
}

Tape::NodeId DynamicsConditionedPolicy::entropy_node(Tape& tape,
                                                     Tape::NodeId std) const {
  // sum_i [ log std_i + 0.5 (log 2pi + 1) ]
  return tape.sum(
      tape.add_const(tape.log_op(std), 0.5 * (kLogTwoPi + 1.0)));
}

Tape::NodeId DynamicsConditionedPolicy::inv_loss_node(Tape& tape,
                                                      Tape::NodeId z_t,
                                                      Tape::NodeId z_next,
                                                      const Vec& action) const {
  Tape::NodeId in = tape.concat(z_next, z_t);
  Tape::NodeId pred = diffnum::mlp_forward(tape, g_inv_, "g_inv", in);
  Tape::NodeId diff = tape.sub(pred, tape.input(action));
  return tape.sum(tape.square(diff));
}

Tape::NodeId DynamicsConditionedPolicy::rec_loss_node(Tape& tape,
                                                      Tape::NodeId z_obs,
                                                      const Vec& obs) const {
  Tape::NodeId rec = diffnum::mlp_forward(tape, f_rec_, "f_rec", z_obs);
  Tape::NodeId diff = tape.sub(rec, tape.input(obs));
  return tape.sum(tape.square(diff));
}

std::pair<Vec, double> sample_action(const ActionDistribution& dist,
                                     core::SeededRng& rng) {
  Vec action(dist.mean.size());
  for (std::size_t i = 0; i < action.size(); ++i) {
    action[i] = dist.mean[i] + dist.std[i] * rng.normal();
  }
  return {action, log_prob(dist, action)};
}

double log_prob(const ActionDistribution& dist, const Vec& action) {
  double lp = 0.0;
  for (std::size_t i = 0; i < action.size(); ++i) {
    const double z = (action[i] - dist.mean[i]) / dist.std[i];
    lp += -std::log(dist.std[i]) - 0.5 * kLogTwoPi - 0.5 * z * z;
  }
  return lp;
}

}  // namespace dypol::dcp
