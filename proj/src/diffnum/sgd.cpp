#include "dypol/diffnum/sgd.hpp"

#include <cmath>
#include <stdexcept>

namespace dypol::diffnum {

void sgd_step(ParamStore& params, const Vec& grads, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: lr must be > 0");
  if (static_cast<int>(grads.size()) != params.total()) {
    throw std::invalid_argument("sgd_step: gradient length mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::runtime_error("sgd_step: non-finite gradient in '" +
                               params.name_at(static_cast<int>(i)) + "'");
    }
  }
  Vec& data = params.data();
  for (std::size_t i = 0; i < grads.size(); ++i) data[i] -= lr * grads[i];
}

double global_norm(const Vec& grads) {
  double acc = 0.0;
  for (double g : grads) acc += g * g;
  return std::sqrt(acc);
}

void clip_by_global_norm(Vec& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (double& g : grads) g *= s;
  }
}

}  // namespace dypol::diffnum
