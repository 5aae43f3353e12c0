#include "dypol/ppo/gae.hpp"

#include <cmath>
#include <stdexcept>

namespace dypol::ppo {

GaeResult gae(const Vec& rewards, const Vec& values, double bootstrap,
              double gamma, double lambda) {
  if (rewards.size() != values.size()) {
    throw std::invalid_argument("gae: rewards/values length mismatch");
  }
  const int n = static_cast<int>(rewards.size());
  GaeResult out;
  out.advantages.assign(rewards.size(), 0.0);
  out.returns.assign(rewards.size(), 0.0);
  double last = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const double next_value =
        t + 1 < n ? values[static_cast<std::size_t>(t) + 1] : bootstrap;
    const double delta = rewards[static_cast<std::size_t>(t)] +
                         gamma * next_value - values[static_cast<std::size_t>(t)];
    last = delta + gamma * lambda * last;
    out.advantages[static_cast<std::size_t>(t)] = last;
    out.returns[static_cast<std::size_t>(t)] =
        last + values[static_cast<std::size_t>(t)];
  }
  return out;
}

void normalize_advantages(Vec& advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / n);
  for (double& a : advantages) a = (a - mean) / (std + 1e-8);
}

}  // namespace dypol::ppo
