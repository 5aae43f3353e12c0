#pragma once

#include "dypol/core/types.hpp"

namespace dypol::ppo {

struct GaeResult {
  Vec advantages;
  Vec returns;  // advantages + values
};

// Generalized advantage estimation over one episode. `bootstrap` is the
// value estimate of the state after the last transition (time-limit
// bootstrapping).
GaeResult gae(const Vec& rewards, const Vec& values, double bootstrap,
              double gamma, double lambda);

// In-place normalization to mean 0, std 1 (population std, 1e-8 guard).
void normalize_advantages(Vec& advantages);

}  // namespace dypol::ppo
