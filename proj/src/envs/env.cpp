#include "dypol/envs/env.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace dypol::envs {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Forward-mode dual with a fixed partial slot per dynamics value and per
// action coordinate. Exact derivatives; the finite-difference tests are the
// independent check.
template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit by design
  static Dual seeded(double value, int slot) {
    Dual x(value);
    x.d[static_cast<std::size_t>(slot)] = 1.0;
    return x;
  }
};

template <int N>
Dual<N> operator+(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v + b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
template <int N>
Dual<N> operator-(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v - b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
template <int N>
Dual<N> operator-(const Dual<N>& a) {
  Dual<N> r(-a.v);
  for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}
template <int N>
Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v * b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
template <int N>
Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v / b.v);
  const double ib2 = 1.0 / (b.v * b.v);
  for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * ib2;
  return r;
}
template <int N>
Dual<N> sin(const Dual<N>& a) {
  Dual<N> r(std::sin(a.v));
  const double c = std::cos(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = c * a.d[i];
  return r;
}
template <int N>
Dual<N> cos(const Dual<N>& a) {
  Dual<N> r(std::cos(a.v));
  const double s = -std::sin(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = s * a.d[i];
  return r;
}

// plain-double overloads so the templated dynamics compile for T=double
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }

constexpr int kMaxSlots = 6;  // dyn_dim (<=5) + act_dim (<=1)

// One semi-implicit Euler step of family dynamics. `obs` is the plain
// current observation; `dyn` and `act` carry the differentiation type.
template <class T>
void step_family(Family fam, const Vec& obs, const T* act, const T* dyn,
                 double dt, T* out) {
  switch (fam) {
    case Family::kPointMass1d: {
      const T& m = dyn[0];
      const T& c = dyn[1];
      const double p = obs[0];
      const double v = obs[1];
      T v_next = T(v) + T(dt) * (act[0] / m - c * T(v));
      T p_next = T(p) + T(dt) * v_next;
      out[0] = p_next;
      out[1] = v_next;
      return;
    }
    case Family::kPendulum: {
      // kick-drift-kick; keeps energy oscillation O(dt^2) for the
      // conservative part (the plain first-order split misses the 1%
      // conservation gate at dt=0.01)
      const T& m = dyn[0];
      const T& l = dyn[1];
      const T& g = dyn[2];
      const T& b = dyn[3];
      const double theta = std::atan2(obs[1], obs[0]);
      const double omega = obs[2];
      auto alpha = [&](const T& th_sin, const T& om) {
        return (act[0] - b * om - m * g * l * th_sin) / (m * l * l);
      };
      T omega_half =
          T(omega) + T(0.5 * dt) * alpha(T(std::sin(theta)), T(omega));
      T theta_next = T(theta) + T(dt) * omega_half;
      T omega_next =
          omega_half + T(0.5 * dt) * alpha(sin(theta_next), omega_half);
      out[0] = cos(theta_next);
      out[1] = sin(theta_next);
      out[2] = omega_next;
      return;
    }
    case Family::kCartPole: {
      const T& cart_m = dyn[0];
      const T& pole_m = dyn[1];
      const T& l = dyn[2];
      const T& g = dyn[3];
      const T& stiff = dyn[4];
      const double x = obs[0];
      const double xd = obs[1];
      const double ct = obs[2];
      const double st = obs[3];
      const double theta = std::atan2(st, ct);
      const double td = obs[4];
      // generalized coordinates (x, theta), theta from hanging-down;
      // joint spring torque -stiff*sin(theta) pulls toward theta=0;
      // kick-drift-kick like the pendulum
      auto accel = [&](const T& sin_th, const T& cos_th, const T& tdot, T* xdd,
                       T* tdd) {
        T A = cart_m + pole_m;
        T B = pole_m * l * cos_th;
        T C = pole_m * l * l;
        T D = act[0] + pole_m * l * tdot * tdot * sin_th;
        T E = -stiff * sin_th - pole_m * g * l * sin_th;
        T det = A * C - B * B;
        *xdd = (C * D - B * E) / det;
        *tdd = (A * E - B * D) / det;
      };
      T xdd1, tdd1;
      accel(T(st), T(ct), T(td), &xdd1, &tdd1);
      T xd_half = T(xd) + T(0.5 * dt) * xdd1;
      T td_half = T(td) + T(0.5 * dt) * tdd1;
      T x_next = T(x) + T(dt) * xd_half;
      T theta_next = T(theta) + T(dt) * td_half;
      T sin_next = sin(theta_next);
      T cos_next = cos(theta_next);
      T xdd2, tdd2;
      accel(sin_next, cos_next, td_half, &xdd2, &tdd2);
      out[0] = x_next;
      out[1] = xd_half + T(0.5 * dt) * xdd2;
      out[2] = cos_next;
      out[3] = sin_next;
      out[4] = td_half + T(0.5 * dt) * tdd2;
      return;
    }
    case Family::kLinearGaussian: {
      out[0] = dyn[0] * T(obs[0]) + act[0];
      return;
    }
  }
  throw std::logic_error("step_family: unreachable");
}

void check_finite(const Vec& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string("envs: non-finite ") + what);
    }
  }
}

double wrap_angle(double x) {
  // to (-pi, pi]
  return std::atan2(std::sin(x), std::cos(x));
}

const FamilyInfo kInfos[] = {
    {2, 1, 2, 2.0, {1.0, 0.5}, "point_mass_1d"},
    {3, 1, 4, 4.0, {1.0, 1.0, 9.8, 0.1}, "pendulum"},
    {5, 1, 5, 10.0, {1.0, 0.1, 0.5, 9.8, 0.05}, "cart_pole"},
    {1, 1, 1, 1.0, {0.9}, "linear_gaussian"},
};

}  // namespace

Family family_from_string(const std::string& s) {
  for (int i = 0; i < 4; ++i) {
    if (s == kInfos[i].name) return static_cast<Family>(i);
  }
  throw std::invalid_argument("unknown environment family: " + s);
}

std::string family_to_string(Family f) { return family_info(f).name; }

const FamilyInfo& family_info(Family f) {
  return kInfos[static_cast<int>(f)];
}

EnvSpec make_default_spec(Family f) {
  EnvSpec spec;
  spec.family = f;
  spec.dynamics.base = family_info(f).base_dynamics;
  spec.dynamics.values = spec.dynamics.base;
  spec.dynamics.range_frac = 0.0;
  return spec;
}

Vec clip_action(const EnvSpec& spec, const Vec& a) {
  const double lim = family_info(spec.family).action_limit;
  Vec out = a;
  for (double& v : out) v = std::clamp(v, -lim, lim);
  return out;
}

Vec motor_phi(std::uint64_t tau_seed, int d_phi, const Vec& obs) {
  // 1-hidden-layer tanh net, hidden width 16; weights rebuilt from tau_seed
  // on every call so the mapping is a pure function of (tau_seed, obs).
  constexpr int kHidden = 16;
  const int in = static_cast<int>(obs.size());
  core::SeededRng rng(tau_seed, core::streams::kMotorPhi);
  const double b1 = std::sqrt(6.0 / (in + kHidden));
  const double b2 = std::sqrt(6.0 / (kHidden + d_phi));
  std::array<double, kHidden> h{};
  for (int i = 0; i < kHidden; ++i) {
    double acc = 0.0;
    for (int j = 0; j < in; ++j) {
      acc += rng.uniform(-b1, b1) * obs[static_cast<std::size_t>(j)];
    }
    h[static_cast<std::size_t>(i)] = std::tanh(acc);
  }
  Vec out(static_cast<std::size_t>(d_phi), 0.0);
  for (int i = 0; i < d_phi; ++i) {
    double acc = 0.0;
    for (int j = 0; j < kHidden; ++j) {
      acc += rng.uniform(-b2, b2) * h[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

Vec motor_phi(const MotorNoiseSpec& motor, std::uint64_t, const Vec& obs) {
  return motor_phi(motor.tau_seed, motor.d_phi, obs);
}

Vec apply_motor_noise(const MotorNoiseSpec& motor, const State& o, const Vec& a) {
  if (motor.K == 0.0) return a;
  const Vec phi = motor_phi(motor.tau_seed, motor.d_phi, o.vector);
  const int act_dim = static_cast<int>(a.size());
  if (static_cast<int>(motor.omega.size()) != act_dim * motor.d_phi) {
    throw std::invalid_argument("apply_motor_noise: omega shape mismatch");
  }
  Vec out = a;
  for (int i = 0; i < act_dim; ++i) {
    double acc = 0.0;
    for (int j = 0; j < motor.d_phi; ++j) {
      acc += motor.omega[static_cast<std::size_t>(i * motor.d_phi + j)] *
             phi[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] += motor.K * acc;
  }
  return out;
}

Vec step_core(const EnvSpec& spec, const Vec& obs, const Vec& a_exec,
              const Vec& eta) {
  const FamilyInfo& info = family_info(spec.family);
  Vec out(static_cast<std::size_t>(info.obs_dim));
  step_family<double>(spec.family, obs, a_exec.data(), eta.data(), spec.dt,
                      out.data());
  return out;
}

void step_core_jacobians(const EnvSpec& spec, const Vec& obs, const Vec& a_exec,
                         const Vec& eta, Vec* next, Vec* jac_eta, Vec* jac_act) {
  const FamilyInfo& info = family_info(spec.family);
  const int d = info.dyn_dim;
  const int na = info.act_dim;
  using D = Dual<kMaxSlots>;
  std::array<D, 5> dyn;
  std::array<D, 1> act;
  for (int j = 0; j < d; ++j) {
    dyn[static_cast<std::size_t>(j)] = D::seeded(eta[static_cast<std::size_t>(j)], j);
  }
  for (int i = 0; i < na; ++i) {
    act[static_cast<std::size_t>(i)] =
        D::seeded(a_exec[static_cast<std::size_t>(i)], d + i);
  }
  std::array<D, 5> out;
  step_family<D>(spec.family, obs, act.data(), dyn.data(), spec.dt, out.data());
  if (next) {
    next->resize(static_cast<std::size_t>(info.obs_dim));
    for (int k = 0; k < info.obs_dim; ++k) {
      (*next)[static_cast<std::size_t>(k)] = out[static_cast<std::size_t>(k)].v;
    }
  }
  if (jac_eta) {
    jac_eta->assign(static_cast<std::size_t>(info.obs_dim) * d, 0.0);
    for (int k = 0; k < info.obs_dim; ++k) {
      for (int j = 0; j < d; ++j) {
        (*jac_eta)[static_cast<std::size_t>(k * d + j)] =
            out[static_cast<std::size_t>(k)].d[static_cast<std::size_t>(j)];
      }
    }
  }
  if (jac_act) {
    jac_act->assign(static_cast<std::size_t>(info.obs_dim) * na, 0.0);
    for (int k = 0; k < info.obs_dim; ++k) {
      for (int i = 0; i < na; ++i) {
        (*jac_act)[static_cast<std::size_t>(k * na + i)] =
            out[static_cast<std::size_t>(k)].d[static_cast<std::size_t>(d + i)];
      }
    }
  }
}

static Vec executed_action(const EnvSpec& spec, const State& s, const Vec& a) {
  Vec cmd = clip_action(spec, a);
  if (spec.motor && spec.motor->K != 0.0) {
    return apply_motor_noise(*spec.motor, s, cmd);
  }
  return cmd;
}

State step_deterministic(const EnvSpec& spec, const State& s, const Vec& a) {
  check_finite(s.vector, "state");
  check_finite(a, "action");
  const Vec a_exec = executed_action(spec, s, a);
  State out{step_core(spec, s.vector, a_exec, spec.dynamics.values)};
  check_finite(out.vector, "next state");
  return out;
}

State step(const EnvSpec& spec, const State& s, const Vec& a,
           core::SeededRng& rng) {
  State out = step_deterministic(spec, s, a);
  if (spec.noise_std > 0.0) {
    for (double& v : out.vector) v += rng.normal(0.0, spec.noise_std);
  }
  return out;
}

Vec dstep_deta(const EnvSpec& spec, const State& s, const Vec& a) {
  const Vec a_exec = executed_action(spec, s, a);
  Vec jac;
  step_core_jacobians(spec, s.vector, a_exec, spec.dynamics.values, nullptr,
                      &jac, nullptr);
  return jac;
}

Vec dstep_dexec(const EnvSpec& spec, const State& s, const Vec& a_exec) {
  Vec jac;
  step_core_jacobians(spec, s.vector, a_exec, spec.dynamics.values, nullptr,
                      nullptr, &jac);
  return jac;
}

double reward(const EnvSpec& spec, const State& s, const Vec& a) {
  const Vec ca = clip_action(spec, a);
  double a2 = 0.0;
  for (double v : ca) a2 += v * v;
  switch (spec.family) {
    case Family::kPointMass1d: {
      constexpr double kGoal = 1.0;
      return -std::abs(s.vector[0] - kGoal) - 0.01 * a2;
    }
    case Family::kPendulum: {
      const double theta = std::atan2(s.vector[1], s.vector[0]);
      const double from_up = wrap_angle(theta - kPi);
      return -from_up * from_up - 0.1 * s.vector[2] * s.vector[2] - 0.001 * a2;
    }
    case Family::kCartPole: {
      const double theta = std::atan2(s.vector[3], s.vector[2]);
      const double from_up = wrap_angle(theta - kPi);
      const bool alive = std::abs(from_up) < 0.4 && std::abs(s.vector[0]) < 2.4;
      return (alive ? 1.0 : 0.0) - 0.01 * a2;
    }
    case Family::kLinearGaussian:
      return -s.vector[0] * s.vector[0] - 0.01 * a2;
  }
  throw std::logic_error("reward: unreachable");
}

State reset(const EnvSpec& spec, core::SeededRng& rng) {
  const double w = spec.init_spread;
  auto u = [&](double half) { return rng.uniform(-half * w, half * w); };
  switch (spec.family) {
    case Family::kPointMass1d:
      return State{{u(0.1), u(0.1)}};
    case Family::kPendulum: {
      const double theta = kPi + u(0.25);
      return State{{std::cos(theta), std::sin(theta), u(0.2)}};
    }
    case Family::kCartPole: {
      const double x = u(0.05);
      const double xd = u(0.05);
      const double theta = kPi + u(0.1);
      return State{{x, xd, std::cos(theta), std::sin(theta), u(0.05)}};
    }
    case Family::kLinearGaussian:
      return State{{1.0 + u(0.5)}};
  }
  throw std::logic_error("reset: unreachable");
}

}  // namespace dypol::envs
