#pragma once

#include "dypol/core/rng.hpp"
#include "dypol/core/types.hpp"

namespace dypol::core {

// Draws each component independently uniform in
// [base*(1-range_frac), base*(1+range_frac)]. Rejects range_frac >= 1 which
// would allow non-positive parameters.
DynamicsVector sample_dynamics(const DynamicsVector& base, double range_frac,
                               SeededRng& rng);

// Zero-centered fractional deviation: values/base - 1 per component.
Vec normalize_dynamics(const DynamicsVector& dyn);

// Inverse of normalize_dynamics: base*(1+normalized).
Vec denormalize_dynamics(const Vec& normalized, const Vec& base);

// Splits an episode into floor(len/T) consecutive non-overlapping chunks;
// the trailing remainder is dropped. An empty episode gives an empty list.
std::vector<Chunk> chunk_episode(const Episode& ep, int T);

}  // namespace dypol::core
