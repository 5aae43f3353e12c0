#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dypol/core/rng.hpp"
#include "dypol/core/types.hpp"

namespace dypol::envs {

enum class Family { kPointMass1d, kPendulum, kCartPole, kLinearGaussian };

Family family_from_string(const std::string& s);
std::string family_to_string(Family f);

// State-dependent action disturbance K * omega * Phi_tau(o). Phi_tau is a
// fixed one-hidden-layer tanh network whose weights are fully determined by
// tau_seed; omega is an act_dim x d_phi matrix stored row-major.
struct MotorNoiseSpec {
  std::uint64_t tau_seed = 0;
  int d_phi = 4;
  Vec omega;
  double K = 0.0;
};

struct State {
  Vec vector;
};

struct EnvSpec {
  Family family = Family::kPointMass1d;
  core::DynamicsVector dynamics;
  double noise_std = 0.0;  // process noise per observation coordinate
  std::optional<MotorNoiseSpec> motor;
  double dt = 0.05;
  int horizon = 200;
  double init_spread = 1.0;  // scales the family's initial-state box
  std::uint64_t seed = 0;
};

struct FamilyInfo {
  int obs_dim;
  int act_dim;
  int dyn_dim;
  double action_limit;  // symmetric box [-limit, limit]
  Vec base_dynamics;
  const char* name;
};

const FamilyInfo& family_info(Family f);

// Default spec with base dynamics for a family.
EnvSpec make_default_spec(Family f);

// Evaluates the fixed noise network Phi_tau(o); rebuilt deterministically
// from tau_seed on each call.
Vec motor_phi(const MotorNoiseSpec& motor, std::uint64_t /*unused*/, const Vec& obs);
Vec motor_phi(std::uint64_t tau_seed, int d_phi, const Vec& obs);

// a + K * omega * Phi_tau(o).
Vec apply_motor_noise(const MotorNoiseSpec& motor, const State& o, const Vec& a);

// One deterministic transition: clips the commanded action to the family's
// box, applies motor noise when configured, then integrates one dt with
// semi-implicit Euler.
State step_deterministic(const EnvSpec& spec, const State& s, const Vec& a);

// step_deterministic plus i.i.d. N(0, noise_std^2) per observation coordinate.
State step(const EnvSpec& spec, const State& s, const Vec& a, core::SeededRng& rng);

// Jacobian of step_deterministic with respect to the dynamics values,
// row-major [obs_dim x dyn_dim].
Vec dstep_deta(const EnvSpec& spec, const State& s, const Vec& a);

// Jacobian of the integrator core with respect to the executed action (after
// clipping and motor noise), row-major [obs_dim x act_dim]. Used to chain
// gradients through estimated motor-noise weights.
Vec dstep_dexec(const EnvSpec& spec, const State& s, const Vec& a_exec);

// Integrator core: no clipping, no motor noise; `eta` overrides the spec's
// dynamics values. Exposed for estimators that evaluate candidate dynamics.
Vec step_core(const EnvSpec& spec, const Vec& obs, const Vec& a_exec, const Vec& eta);
void step_core_jacobians(const EnvSpec& spec, const Vec& obs, const Vec& a_exec,
                         const Vec& eta, Vec* next, Vec* jac_eta, Vec* jac_act);

double reward(const EnvSpec& spec, const State& s, const Vec& a);
State reset(const EnvSpec& spec, core::SeededRng& rng);

Vec clip_action(const EnvSpec& spec, const Vec& a);

}  // namespace dypol::envs
