#pragma once

#include "dypol/core/types.hpp"
#include "dypol/diffnum/param_store.hpp"

namespace dypol::diffnum {

// params <- params - lr * grads, elementwise. A NaN/Inf gradient rejects the
// whole step and reports the offending parameter by name.
void sgd_step(ParamStore& params, const Vec& grads, double lr);

double global_norm(const Vec& grads);

// Rescales grads in place so the global norm is at most max_norm.
void clip_by_global_norm(Vec& grads, double max_norm);

}  // namespace dypol::diffnum
