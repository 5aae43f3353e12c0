#pragma once

#include <span>
#include <string>
#include <vector>

#include "dypol/core/rng.hpp"
#include "dypol/diffnum/param_store.hpp"
#include "dypol/diffnum/tape.hpp"

namespace dypol::diffnum {

enum class Activation { kTanh, kRelu };
enum class OutputTransform { kIdentity, kSoftplusTail };

// Feed-forward network description. `widths` is the full [in, hidden...,
// out] sequence. With kSoftplusTail the last `tail_len` outputs pass through
// softplus(x) + tail_floor, which keeps std heads strictly positive.
struct MlpSpec {
  std::vector<int> widths;
  Activation activation = Activation::kTanh;
  OutputTransform output = OutputTransform::kIdentity;
  int tail_len = 0;
  double tail_floor = 1e-4;

  int in_dim() const { return widths.front(); }
  int out_dim() const { return widths.back(); }
  int layers() const { return static_cast<int>(widths.size()) - 1; }
  void validate() const;
};

// Registers `prefix.W<i>` / `prefix.b<i>` entries. Weights are uniform in
// +-sqrt(6/(fan_in+fan_out)), biases zero.
void mlp_init(ParamStore& params, const MlpSpec& spec, const std::string& prefix,
              core::SeededRng& rng);

// Forward pass recorded on the tape.
Tape::NodeId mlp_forward(Tape& tape, const MlpSpec& spec,
                         const std::string& prefix, Tape::NodeId x);

// Plain forward pass without gradient recording (rollout-time inference).
Vec mlp_eval(const MlpSpec& spec, const ParamStore& params,
             std::span<const double> x, const std::string& prefix);

}  // namespace dypol::diffnum
