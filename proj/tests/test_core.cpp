#include <sstream>

#include "doctest.h"
#include "dypol/core/dynamics.hpp"
#include "dypol/core/episode_io.hpp"
#include "dypol/core/rng.hpp"
#include "oracles.hpp"

using namespace dypol;
using core::Chunk;
using core::DynamicsVector;
using core::Episode;
using core::SeededRng;
using core::Transition;

namespace {

DynamicsVector make_base(Vec base) {
  DynamicsVector d;
  d.values = base;
  d.base = std::move(base);
  d.range_frac = 0.0;
  return d;
}

Episode make_episode(int len, int obs_dim = 2, int act_dim = 1) {
  Episode ep;
  ep.env_id = 1;
  ep.dynamics = make_base({1.0, 9.8});
  Vec obs(static_cast<std::size_t>(obs_dim), 0.0);
  for (int t = 0; t < len; ++t) {
    Transition tr;
    tr.obs = obs;
    tr.action.assign(static_cast<std::size_t>(act_dim), 0.1 * t);
    for (double& v : obs) v += 1.0;
    tr.next_obs = obs;
    tr.reward = -static_cast<double>(t);
    tr.step_index = t + 1;
    ep.transitions.push_back(std::move(tr));
  }
  return ep;
}

}  // namespace

TEST_CASE("rng streams are reproducible and disjoint") {
  SeededRng a(42, 7);
  SeededRng b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  SeededRng c(42, 8);
  bool differs = false;
  SeededRng a2(42, 7);
  for (int i = 0; i < 10; ++i) differs |= a2.next_u64() != c.next_u64();
  CHECK(differs);
}

TEST_CASE("rng normal moments") {
  SeededRng rng(3, 0);
  Vec xs(100000);
  for (double& x : xs) x = rng.normal();
  CHECK(std::abs(oracles::mean_of(xs)) < 0.02);
  CHECK(oracles::var_of(xs) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("sample_dynamics zero range forces base") {
  DynamicsVector base = make_base({1.0, 9.8});
  SeededRng rng(1, 0);
  DynamicsVector s = core::sample_dynamics(base, 0.0, rng);
  CHECK(s.values[0] == 1.0);
  CHECK(s.values[1] == 9.8);
}

TEST_CASE("sample_dynamics stays in its interval") {
  DynamicsVector base = make_base({1.0, 9.8});
  SeededRng rng(17, 0);
  for (int i = 0; i < 1000; ++i) {
    DynamicsVector s = core::sample_dynamics(base, 0.05, rng);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(s.values[j] >= 0.95 * base.base[j]);
      CHECK(s.values[j] <= 1.05 * base.base[j]);
    }
  }
}

TEST_CASE("sample_dynamics uniform law over 10k draws") {
  // Monte-Carlo oracle: empirical mean within 1% of base, min/max within
  // 0.5% of the interval ends (width-relative).
  DynamicsVector base = make_base({2.0, 0.5});
  SeededRng rng(99, 4);
  const double x = 0.3;
  std::vector<Vec> draws(2);
  for (int i = 0; i < 10000; ++i) {
    DynamicsVector s = core::sample_dynamics(base, x, rng);
    draws[0].push_back(s.values[0]);
    draws[1].push_back(s.values[1]);
  }
  for (std::size_t j = 0; j < 2; ++j) {
    const double b = base.base[j];
    const double lo = b * (1 - x), hi = b * (1 + x);
    CHECK(std::abs(oracles::mean_of(draws[j]) - b) < 0.01 * b);
    const auto [mn, mx] = std::minmax_element(draws[j].begin(), draws[j].end());
    CHECK((*mn - lo) / (hi - lo) < 0.005);
    CHECK((hi - *mx) / (hi - lo) < 0.005);
  }
}

TEST_CASE("sample_dynamics determinism given (seed, stream)") {
  DynamicsVector base = make_base({1.0, 9.8, 0.1});
  SeededRng r1(5, 11), r2(5, 11);
  for (int i = 0; i < 20; ++i) {
    DynamicsVector a = core::sample_dynamics(base, 0.2, r1);
    DynamicsVector b = core::sample_dynamics(base, 0.2, r2);
    CHECK(a.values == b.values);
  }
}

TEST_CASE("sample_dynamics rejects range >= 1") {
  DynamicsVector base = make_base({1.0});
  SeededRng rng(1, 0);
  CHECK_THROWS_AS(core::sample_dynamics(base, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(core::sample_dynamics(base, -0.1, rng), std::invalid_argument);
}

TEST_CASE("normalize_dynamics") {
  DynamicsVector d = make_base({1.0, 9.8});
  CHECK(core::normalize_dynamics(d) == Vec{0.0, 0.0});

  d.values = {1.05};
  d.base = {1.0};
  CHECK(core::normalize_dynamics(d)[0] == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("normalize/denormalize round trip") {
  SeededRng rng(8, 2);
  for (int i = 0; i < 50; ++i) {
    DynamicsVector base = make_base({rng.uniform(0.1, 5), rng.uniform(0.1, 5)});
    DynamicsVector s = core::sample_dynamics(base, 0.4, rng);
    Vec back = core::denormalize_dynamics(core::normalize_dynamics(s), s.base);
    for (std::size_t j = 0; j < back.size(); ++j) {
      CHECK(back[j] == doctest::Approx(s.values[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("normalized in-range vectors stay within +-range") {
  SeededRng rng(21, 0);
  DynamicsVector base = make_base({3.0, 0.2, 7.0});
  for (int i = 0; i < 200; ++i) {
    DynamicsVector s = core::sample_dynamics(base, 0.25, rng);
    for (double v : core::normalize_dynamics(s)) {
      CHECK(std::abs(v) <= 0.25 + 1e-12);
    }
  }
}

TEST_CASE("chunk_episode counts") {
  CHECK(core::chunk_episode(make_episode(150), 50).size() == 3);
  CHECK(core::chunk_episode(make_episode(49), 50).empty());
  CHECK(core::chunk_episode(make_episode(120), 50).size() == 2);
  CHECK(core::chunk_episode(Episode{}, 50).empty());
  CHECK_THROWS_AS(core::chunk_episode(make_episode(10), 0), std::invalid_argument);
}

TEST_CASE("chunk concatenation reproduces an episode prefix") {
  Episode ep = make_episode(23, 3, 2);
  const int T = 5;
  auto chunks = core::chunk_episode(ep, T);
  REQUIRE(chunks.size() == 4);
  int step = 0;
  for (const Chunk& c : chunks) {
    CHECK(c.x.size() == c.y.size() + static_cast<std::size_t>(c.T * c.act_dim));
    for (int t = 0; t < c.T; ++t, ++step) {
      const Transition& tr = ep.transitions[static_cast<std::size_t>(step)];
      for (int j = 0; j < c.obs_dim; ++j) {
        CHECK(c.x[static_cast<std::size_t>(t * (c.obs_dim + c.act_dim) + j)] ==
              tr.obs[static_cast<std::size_t>(j)]);
        CHECK(c.y[static_cast<std::size_t>(t * c.obs_dim + j)] ==
              tr.next_obs[static_cast<std::size_t>(j)]);
      }
      for (int j = 0; j < c.act_dim; ++j) {
        CHECK(c.x[static_cast<std::size_t>(t * (c.obs_dim + c.act_dim) +
                                           c.obs_dim + j)] ==
              tr.action[static_cast<std::size_t>(j)]);
      }
    }
  }
  CHECK(step == 20);  // 3 trailing steps dropped
}

TEST_CASE("episode JSONL round trip") {
  std::vector<Episode> eps{make_episode(7), make_episode(3)};
  eps[1].env_id = 9;
  std::ostringstream out;
  core::write_episodes_jsonl(eps, out);

  std::istringstream in(out.str());
  std::vector<Episode> back = core::read_episodes_jsonl(in);
  REQUIRE(back.size() == 2);
  CHECK(back[1].env_id == 9);
  CHECK(back[0].transitions.size() == 7);
  CHECK(back[0].transitions[2].obs == eps[0].transitions[2].obs);
  CHECK(back[0].transitions[2].reward == eps[0].transitions[2].reward);
  CHECK(back[0].dynamics.values == eps[0].dynamics.values);

  // serialization is deterministic
  std::ostringstream again;
  core::write_episodes_jsonl(back, again);
  CHECK(again.str() == out.str());
}

TEST_CASE("dynamics vector validation") {
  DynamicsVector bad = make_base({1.0, -2.0});
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  DynamicsVector ok = make_base({1.0, 2.0});
  CHECK_NOTHROW(ok.validate());
}
