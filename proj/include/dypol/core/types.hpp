#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dypol {
using Vec = std::vector<double>;
}

namespace dypol::core {

// Environment dynamics parameter vector. `values` lives in the interval
// [base*(1-range_frac), base*(1+range_frac)] componentwise; base entries are
// strictly positive so fractional perturbation is well-defined.
struct DynamicsVector {
  Vec values;
  Vec base;
  double range_frac = 0.0;

  std::size_t dim() const { return values.size(); }
  void validate() const;
};

struct Transition {
  Vec obs;
  Vec action;
  Vec next_obs;
  double reward = 0.0;
  int step_index = 1;  // 1-based
};

struct Episode {
  int env_id = 1;
  std::vector<Transition> transitions;
  DynamicsVector dynamics;
};

// Fixed-length temporal slice of an episode. `x` holds [obs, action] blocks
// for T consecutive steps, `y` the matching next-observations.
struct Chunk {
  Vec x;
  Vec y;
  int T = 0;
  int obs_dim = 0;
  int act_dim = 0;
};

// Diagonal Gaussian; std strictly positive.
struct DiagGaussian {
  Vec mean;
  Vec std;

  std::size_t dim() const { return mean.size(); }
};

}  // namespace dypol::core
