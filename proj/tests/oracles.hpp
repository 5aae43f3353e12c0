#pragma once

// Test-only oracles, kept independent of the library paths they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "dypol/core/rng.hpp"
#include "dypol/core/types.hpp"
#include "dypol/diffnum/param_store.hpp"

namespace oracles {

using dypol::Vec;

// Straight-line MLP evaluation written from scratch (weights [out x in]
// row-major, tanh hidden layers, optional softplus+floor on the last
// `tail` outputs).
inline Vec straight_line_mlp(const std::vector<Vec>& weights,
                             const std::vector<Vec>& biases,
                             const std::vector<int>& widths, const Vec& input,
                             int tail = 0, double floor = 1e-4) {
  Vec h = input;
  const int layers = static_cast<int>(widths.size()) - 1;
  for (int l = 0; l < layers; ++l) {
    const int in = widths[static_cast<std::size_t>(l)];
    const int out = widths[static_cast<std::size_t>(l) + 1];
    Vec next(static_cast<std::size_t>(out), 0.0);
    for (int i = 0; i < out; ++i) {
      double acc = biases[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
      for (int j = 0; j < in; ++j) {
        acc += weights[static_cast<std::size_t>(l)]
                      [static_cast<std::size_t>(i * in + j)] *
               h[static_cast<std::size_t>(j)];
      }
      next[static_cast<std::size_t>(i)] = acc;
    }
    h = next;
    if (l + 1 < layers) {
      for (double& v : h) v = std::tanh(v);
    }
  }
  for (int i = static_cast<int>(h.size()) - tail; i < static_cast<int>(h.size()); ++i) {
    h[static_cast<std::size_t>(i)] =
        std::log1p(std::exp(h[static_cast<std::size_t>(i)])) + floor;
  }
  return h;
}

// Central finite differences of a scalar loss with respect to every entry of
// the parameter store.
inline Vec finite_diff_grad(dypol::diffnum::ParamStore& params,
                            const std::function<double()>& loss,
                            double step = 1e-5) {
  Vec grad(static_cast<std::size_t>(params.total()), 0.0);
  for (int i = 0; i < params.total(); ++i) {
    double& w = params.data()[static_cast<std::size_t>(i)];
    const double saved = w;
    w = saved + step;
    const double up = loss();
    w = saved - step;
    const double down = loss();
    w = saved;
    grad[static_cast<std::size_t>(i)] = (up - down) / (2.0 * step);
  }
  return grad;
}

// Relative error with an absolute guard for near-zero coordinates.
inline double rel_err(double a, double b, double guard = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), guard});
}

inline double max_rel_err(const Vec& a, const Vec& b, double guard = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, rel_err(a[i], b[i], guard));
  }
  return worst;
}

// Exact conjugate posterior for the scalar linear-Gaussian system
// o' = eta*o + a + N(0, v^2) under prior N(f0, g0^2); data given as
// (o, a, o') triples.
struct ConjugatePosterior {
  double mean;
  double std;
};

inline ConjugatePosterior conjugate_linear_gaussian(
    const std::vector<std::array<double, 3>>& data, double f0, double g0,
    double v) {
  double precision = 1.0 / (g0 * g0);
  double weighted = f0 / (g0 * g0);
  for (const auto& [o, a, next] : data) {
    precision += o * o / (v * v);
    weighted += o * (next - a) / (v * v);
  }
  const double var = 1.0 / precision;
  return {var * weighted, std::sqrt(var)};
}

// One-sided Kolmogorov-Smirnov test against U(lo, hi); returns the p-value
// via the asymptotic Kolmogorov distribution.
inline double ks_uniform_pvalue(Vec samples, double lo, double hi) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = (samples[i] - lo) / (hi - lo);
    const double lo_step = static_cast<double>(i) / n;
    const double hi_step = static_cast<double>(i + 1) / n;
    d = std::max({d, std::abs(cdf - lo_step), std::abs(cdf - hi_step)});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

inline double mean_of(const Vec& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

inline double var_of(const Vec& xs) {
  const double m = mean_of(xs);
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return v / static_cast<double>(xs.size());
}

}  // namespace oracles
