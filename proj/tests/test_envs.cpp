#include "doctest.h"
#include "dypol/core/dynamics.hpp"
#include "dypol/envs/env.hpp"
#include "oracles.hpp"

using namespace dypol;
using envs::EnvSpec;
using envs::Family;
using envs::State;

namespace {

EnvSpec spec_with(Family f, Vec values = {}) {
  EnvSpec s = envs::make_default_spec(f);
  if (!values.empty()) s.dynamics.values = std::move(values);
  return s;
}

Vec fd_jacobian_eta(const EnvSpec& spec, const State& s, const Vec& a,
                    double step = 1e-6) {
  const int od = envs::family_info(spec.family).obs_dim;
  const int d = envs::family_info(spec.family).dyn_dim;
  Vec jac(static_cast<std::size_t>(od * d));
  for (int j = 0; j < d; ++j) {
    EnvSpec up = spec, down = spec;
    up.dynamics.values[static_cast<std::size_t>(j)] += step;
    down.dynamics.values[static_cast<std::size_t>(j)] -= step;
    const State su = envs::step_deterministic(up, s, a);
    const State sd = envs::step_deterministic(down, s, a);
    for (int k = 0; k < od; ++k) {
      jac[static_cast<std::size_t>(k * d + j)] =
          (su.vector[static_cast<std::size_t>(k)] -
           sd.vector[static_cast<std::size_t>(k)]) /
          (2 * step);
    }
  }
  return jac;
}

State random_state(Family f, core::SeededRng& rng) {
  switch (f) {
    case Family::kPointMass1d:
      return {{rng.uniform(-2, 2), rng.uniform(-2, 2)}};
    case Family::kPendulum: {
      const double th = rng.uniform(-3.1, 3.1);
      return {{std::cos(th), std::sin(th), rng.uniform(-4, 4)}};
    }
    case Family::kCartPole: {
      const double th = rng.uniform(-3.1, 3.1);
      return {{rng.uniform(-1, 1), rng.uniform(-1, 1), std::cos(th),
               std::sin(th), rng.uniform(-2, 2)}};
    }
    case Family::kLinearGaussian:
      return {{rng.uniform(-2, 2)}};
  }
  return {{}};
}

}  // namespace

TEST_CASE("point mass closed-form Euler step") {
  EnvSpec s = spec_with(Family::kPointMass1d, {1.0, 0.0});
  s.dt = 0.05;
  State next = envs::step_deterministic(s, State{{0.0, 0.0}}, Vec{1.0});
  CHECK(next.vector[1] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(next.vector[0] == doctest::Approx(0.0025).epsilon(1e-12));
}

TEST_CASE("linear gaussian closed form") {
  EnvSpec s = spec_with(Family::kLinearGaussian, {2.0});
  State next = envs::step_deterministic(s, State{{1.0}}, Vec{0.5});
  CHECK(next.vector[0] == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("pendulum hanging down is an equilibrium") {
  EnvSpec s = spec_with(Family::kPendulum);
  State down{{1.0, 0.0, 0.0}};  // theta = 0
  State next = envs::step_deterministic(s, down, Vec{0.0});
  CHECK(next.vector[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(next.vector[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(next.vector[2] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("step with zero noise equals the deterministic step") {
  core::SeededRng rng(1, 0);
  for (Family f : {Family::kPointMass1d, Family::kPendulum, Family::kCartPole,
                   Family::kLinearGaussian}) {
    EnvSpec s = spec_with(f);
    s.noise_std = 0.0;
    State st = random_state(f, rng);
    Vec a{0.3};
    CHECK(envs::step(s, st, a, rng).vector ==
          envs::step_deterministic(s, st, a).vector);
  }
}

TEST_CASE("process noise has the configured variance") {
  // 1e5 repeated steps from a fixed (s, a): residual variance within 3% of v^2
  EnvSpec s = spec_with(Family::kPointMass1d);
  s.noise_std = 0.01;
  core::SeededRng rng(42, 0);
  const State st{{0.2, -0.1}};
  const Vec a{0.5};
  const State base = envs::step_deterministic(s, st, a);
  std::vector<Vec> residuals(2);
  for (int i = 0; i < 100000; ++i) {
    State noisy = envs::step(s, st, a, rng);
    for (std::size_t k = 0; k < 2; ++k) {
      residuals[k].push_back(noisy.vector[k] - base.vector[k]);
    }
  }
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(std::abs(oracles::mean_of(residuals[k])) < 3e-4);
    CHECK(oracles::var_of(residuals[k]) ==
          doctest::Approx(1e-4).epsilon(0.03));
  }
}

TEST_CASE("fixed rng seed gives identical trajectories") {
  EnvSpec s = spec_with(Family::kPendulum);
  s.noise_std = 0.02;
  auto run = [&] {
    core::SeededRng reset(7, 1), noise(7, 2);
    State st = envs::reset(s, reset);
    Vec traj;
    for (int t = 0; t < 50; ++t) {
      st = envs::step(s, st, Vec{0.5}, noise);
      traj.insert(traj.end(), st.vector.begin(), st.vector.end());
    }
    return traj;
  };
  CHECK(run() == run());
}

TEST_CASE("dstep_deta closed forms") {
  // point mass d v'/d m = -dt*a/m^2
  EnvSpec pm = spec_with(Family::kPointMass1d, {1.0, 0.5});
  pm.dt = 0.05;
  Vec jac = envs::dstep_deta(pm, State{{0.0, 0.0}}, Vec{1.0});
  // rows: [p', v'] x cols [m, c]; v' row is index 1
  CHECK(jac[2] == doctest::Approx(-0.05).epsilon(1e-9));

  EnvSpec lg = spec_with(Family::kLinearGaussian);
  Vec jlg = envs::dstep_deta(lg, State{{3.0}}, Vec{0.0});
  CHECK(jlg[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("dstep_deta matches finite differences for all families") {
  core::SeededRng rng(2025, 8);
  for (Family f : {Family::kPointMass1d, Family::kPendulum, Family::kCartPole,
                   Family::kLinearGaussian}) {
    for (int trial = 0; trial < 100; ++trial) {
      EnvSpec s = envs::make_default_spec(f);
      core::SeededRng dyn_rng(rng.next_u64(), 0);
      s.dynamics = core::sample_dynamics(s.dynamics, 0.3, dyn_rng);
      State st = random_state(f, rng);
      Vec a{rng.uniform(-1.5, 1.5)};
      Vec got = envs::dstep_deta(s, st, a);
      Vec fd = fd_jacobian_eta(s, st, a);
      CHECK(oracles::max_rel_err(got, fd, 1e-4) < 1e-5);
    }
  }
}

TEST_CASE("dstep_dexec matches finite differences") {
  core::SeededRng rng(99, 1);
  for (Family f : {Family::kPointMass1d, Family::kPendulum, Family::kCartPole,
                   Family::kLinearGaussian}) {
    EnvSpec s = envs::make_default_spec(f);
    State st = random_state(f, rng);
    const Vec a{0.7};
    Vec got = envs::dstep_dexec(s, st, a);
    const double h = 1e-6;
    Vec up = envs::step_core(s, st.vector, Vec{a[0] + h}, s.dynamics.values);
    Vec dn = envs::step_core(s, st.vector, Vec{a[0] - h}, s.dynamics.values);
    for (std::size_t k = 0; k < up.size(); ++k) {
      CHECK(oracles::rel_err(got[k], (up[k] - dn[k]) / (2 * h), 1e-4) < 1e-5);
    }
  }
}

TEST_CASE("rewards at their reference points") {
  EnvSpec pm = spec_with(Family::kPointMass1d);
  CHECK(envs::reward(pm, State{{1.0, 0.0}}, Vec{0.0}) == 0.0);

  EnvSpec pend = spec_with(Family::kPendulum);
  CHECK(envs::reward(pend, State{{-1.0, 0.0, 0.0}}, Vec{0.0}) == 0.0);

  // reward bounds
  core::SeededRng rng(4, 4);
  for (int i = 0; i < 200; ++i) {
    State s = random_state(Family::kPointMass1d, rng);
    CHECK(envs::reward(pm, s, Vec{rng.uniform(-3, 3)}) <= 0.0);
    State sp = random_state(Family::kPendulum, rng);
    CHECK(envs::reward(pend, sp, Vec{rng.uniform(-5, 5)}) <= 0.0);
    EnvSpec cp = spec_with(Family::kCartPole);
    State sc = random_state(Family::kCartPole, rng);
    CHECK(envs::reward(cp, sc, Vec{rng.uniform(-10, 10)}) <= 1.0);
  }
}

TEST_CASE("reset distribution") {
  EnvSpec s = spec_with(Family::kPointMass1d);
  s.init_spread = 0.0;
  core::SeededRng rng(6, 0);
  State nominal = envs::reset(s, rng);
  CHECK(nominal.vector == Vec{0.0, 0.0});

  core::SeededRng r1(9, 3), r2(9, 3);
  s.init_spread = 1.0;
  CHECK(envs::reset(s, r1).vector == envs::reset(s, r2).vector);

  // 10^4 resets stay inside the documented box
  for (int i = 0; i < 10000; ++i) {
    State st = envs::reset(s, rng);
    CHECK(std::abs(st.vector[0]) <= 0.1);
    CHECK(std::abs(st.vector[1]) <= 0.1);
  }
  EnvSpec pend = spec_with(Family::kPendulum);
  for (int i = 0; i < 10000; ++i) {
    State st = envs::reset(pend, rng);
    const double theta = std::atan2(st.vector[1], st.vector[0]);
    const double from_up = std::atan2(std::sin(theta - 3.14159265358979),
                                      std::cos(theta - 3.14159265358979));
    CHECK(std::abs(from_up) <= 0.25 + 1e-9);
    CHECK(std::abs(st.vector[2]) <= 0.2);
  }
}

TEST_CASE("motor noise") {
  envs::MotorNoiseSpec motor;
  motor.tau_seed = 11;
  motor.d_phi = 4;
  motor.omega = Vec{0.5, -0.2, 0.1, 0.7};
  State o{{0.3, -0.5}};

  SUBCASE("K = 0 leaves the action unchanged") {
    motor.K = 0.0;
    CHECK(envs::apply_motor_noise(motor, o, Vec{1.0}) == Vec{1.0});
  }
  SUBCASE("zero omega leaves the action unchanged") {
    motor.K = 1.0;
    motor.omega.assign(4, 0.0);
    CHECK(envs::apply_motor_noise(motor, o, Vec{1.0}) == Vec{1.0});
  }
  SUBCASE("rebuilding Phi is deterministic") {
    motor.K = 0.8;
    Vec a1 = envs::apply_motor_noise(motor, o, Vec{1.0});
    Vec a2 = envs::apply_motor_noise(motor, o, Vec{1.0});
    CHECK(a1 == a2);
    CHECK(a1 != Vec{1.0});
  }
  SUBCASE("changing tau changes the perturbation") {
    motor.K = 0.8;
    Vec a1 = envs::apply_motor_noise(motor, o, Vec{1.0});
    motor.tau_seed = 12;
    Vec a2 = envs::apply_motor_noise(motor, o, Vec{1.0});
    CHECK(a1 != a2);

    motor.K = 0.0;
    Vec b1 = envs::apply_motor_noise(motor, o, Vec{1.0});
    motor.tau_seed = 11;
    Vec b2 = envs::apply_motor_noise(motor, o, Vec{1.0});
    CHECK(b1 == b2);  // K=0 is invariant to tau
  }
}

TEST_CASE("undamped pendulum conserves energy within 1%") {
  // integrator quality gate at dt = 0.01, one horizon
  EnvSpec s = spec_with(Family::kPendulum, {1.0, 1.0, 9.8, 0.0});
  s.dt = 0.01;
  const double m = 1.0, l = 1.0, g = 9.8;
  auto energy = [&](const State& st) {
    const double cos_theta = st.vector[0];
    const double omega = st.vector[2];
    return 0.5 * m * l * l * omega * omega + m * g * l * (1.0 - cos_theta);
  };
  const double theta0 = 1.0;
  State st{{std::cos(theta0), std::sin(theta0), 0.0}};
  const double e0 = energy(st);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    st = envs::step_deterministic(st.vector.size() == 3 ? s : s, st, Vec{0.0});
    worst = std::max(worst, std::abs(energy(st) - e0) / e0);
  }
  CHECK(worst < 0.01);
}

TEST_CASE("non-finite states are rejected with a diagnostic") {
  EnvSpec s = spec_with(Family::kPointMass1d);
  State bad{{std::nan(""), 0.0}};
  CHECK_THROWS_AS(envs::step_deterministic(s, bad, Vec{0.0}), std::runtime_error);
}

TEST_CASE("trig pairs stay on the circle") {
  EnvSpec s = spec_with(Family::kPendulum);
  core::SeededRng rng(3, 3);
  State st = envs::reset(s, rng);
  for (int t = 0; t < 500; ++t) {
    st = envs::step_deterministic(s, st, Vec{rng.uniform(-4, 4)});
    const double r = st.vector[0] * st.vector[0] + st.vector[1] * st.vector[1];
    CHECK(r == doctest::Approx(1.0).epsilon(1e-9));
  }
}
