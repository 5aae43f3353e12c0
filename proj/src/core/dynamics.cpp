#include "dypol/core/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace dypol::core {

void DynamicsVector::validate() const {
  if (values.empty() || values.size() != base.size()) {
    throw std::invalid_argument("DynamicsVector: values/base size mismatch");
  }
  if (range_frac < 0.0 || range_frac >= 1.0) {
    throw std::invalid_argument("DynamicsVector: range_frac must be in [0,1)");
  }
  for (std::size_t j = 0; j < base.size(); ++j) {
    if (!(base[j] > 0.0) || !std::isfinite(base[j])) {
      throw std::invalid_argument("DynamicsVector: base must be positive");
    }
    if (!std::isfinite(values[j])) {
      throw std::invalid_argument("DynamicsVector: non-finite value");
    }
  }
}

DynamicsVector sample_dynamics(const DynamicsVector& base, double range_frac,
                               SeededRng& rng) {
  if (range_frac < 0.0 || range_frac >= 1.0) {
    throw std::invalid_argument(
        "sample_dynamics: range_frac must be in [0,1); got " +
        std::to_string(range_frac));
  }
  DynamicsVector out;
  out.base = base.base;
  out.range_frac = range_frac;
  out.values.resize(base.base.size());
  for (std::size_t j = 0; j < base.base.size(); ++j) {
    const double b = base.base[j];
    out.values[j] = rng.uniform(b * (1.0 - range_frac), b * (1.0 + range_frac));
  }
  return out;
}

Vec normalize_dynamics(const DynamicsVector& dyn) {
  Vec out(dyn.values.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = dyn.values[j] / dyn.base[j] - 1.0;
  }
  return out;
}

Vec denormalize_dynamics(const Vec& normalized, const Vec& base) {
  Vec out(normalized.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = base[j] * (1.0 + normalized[j]);
  }
  return out;
}

std::vector<Chunk> chunk_episode(const Episode& ep, int T) {
  if (T < 1) throw std::invalid_argument("chunk_episode: T must be >= 1");
  std::vector<Chunk> chunks;
  const int len = static_cast<int>(ep.transitions.size());
  if (len < T) return chunks;
  const int obs_dim = static_cast<int>(ep.transitions.front().obs.size());
  const int act_dim = static_cast<int>(ep.transitions.front().action.size());
  const int k = len / T;
  chunks.reserve(k);
  for (int i = 0; i < k; ++i) {
    Chunk c;
    c.T = T;
    c.obs_dim = obs_dim;
    c.act_dim = act_dim;
    c.x.reserve(static_cast<std::size_t>(T) * (obs_dim + act_dim));
    c.y.reserve(static_cast<std::size_t>(T) * obs_dim);
    for (int t = 0; t < T; ++t) {
      const Transition& tr = ep.transitions[static_cast<std::size_t>(i * T + t)];
      c.x.insert(c.x.end(), tr.obs.begin(), tr.obs.end());
      c.x.insert(c.x.end(), tr.action.begin(), tr.action.end());
      c.y.insert(c.y.end(), tr.next_obs.begin(), tr.next_obs.end());
    }
    chunks.push_back(std::move(c));
  }
  return chunks;
}

}  // namespace dypol::core
