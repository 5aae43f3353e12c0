#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "dypol/core/rng.hpp"
#include "dypol/diffnum/checkpoint.hpp"
#include "dypol/diffnum/mlp.hpp"
#include "dypol/diffnum/sgd.hpp"
#include "oracles.hpp"

using namespace dypol;
using diffnum::Activation;
using diffnum::MlpSpec;
using diffnum::OutputTransform;
using diffnum::ParamStore;
using diffnum::Tape;

namespace {

MlpSpec spec_of(std::vector<int> widths,
                OutputTransform out = OutputTransform::kIdentity, int tail = 0) {
  MlpSpec s;
  s.widths = std::move(widths);
  s.output = out;
  s.tail_len = tail;
  return s;
}

}  // namespace

TEST_CASE("mlp zero weights give zero output") {
  ParamStore ps;
  MlpSpec spec = spec_of({3, 4, 2});
  core::SeededRng rng(1, 0);
  diffnum::mlp_init(ps, spec, "net", rng);
  for (double& v : ps.data()) v = 0.0;
  Vec out = diffnum::mlp_eval(spec, ps, Vec{0.3, -0.7, 2.0}, "net");
  CHECK(out == Vec{0.0, 0.0});
}

TEST_CASE("single linear identity layer") {
  ParamStore ps;
  MlpSpec spec = spec_of({3, 3});
  core::SeededRng rng(1, 0);
  diffnum::mlp_init(ps, spec, "net", rng);
  auto w = ps.values("net.W0");
  std::fill(w.begin(), w.end(), 0.0);
  w[0] = w[4] = w[8] = 1.0;
  Vec in{0.5, -1.5, 3.25};
  CHECK(diffnum::mlp_eval(spec, ps, in, "net") == in);
}

TEST_CASE("mlp matches straight-line oracle") {
  // independently coded forward evaluation of the same weights
  core::SeededRng rng(77, 3);
  for (int trial = 0; trial < 5; ++trial) {
    ParamStore ps;
    MlpSpec spec = spec_of({4, 8, 8, 3});
    diffnum::mlp_init(ps, spec, "net", rng);

    std::vector<Vec> ws, bs;
    for (int l = 0; l < spec.layers(); ++l) {
      auto w = ps.values("net.W" + std::to_string(l));
      auto b = ps.values("net.b" + std::to_string(l));
      ws.emplace_back(w.begin(), w.end());
      bs.emplace_back(b.begin(), b.end());
    }
    Vec in{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    Vec expected = oracles::straight_line_mlp(ws, bs, spec.widths, in);
    Vec got = diffnum::mlp_eval(spec, ps, in, "net");
    CHECK(oracles::max_rel_err(expected, got) < 1e-12);

    // tape forward agrees bitwise with plain eval
    Tape tape(ps);
    const Vec& tape_out = tape.value(diffnum::mlp_forward(tape, spec, "net", tape.input(in)));
    CHECK(tape_out == got);
    CHECK(tape.replay_check());
  }
}

TEST_CASE("softplus tail outputs are strictly positive") {
  core::SeededRng rng(5, 9);
  MlpSpec spec = spec_of({2, 6, 4}, OutputTransform::kSoftplusTail, 2);
  for (int trial = 0; trial < 100; ++trial) {
    ParamStore ps;
    diffnum::mlp_init(ps, spec, "net", rng);
    Vec out = diffnum::mlp_eval(spec, ps, Vec{rng.normal(), rng.normal()}, "net");
    CHECK(out[2] > 0.0);
    CHECK(out[3] > 0.0);
  }
}

TEST_CASE("backward: constant and closed forms") {
  ParamStore ps;
  ps.add("w", {1});
  ps.values("w")[0] = 3.0;

  // constant function: zero gradient
  {
    Tape tape(ps);
    Tape::NodeId c = tape.input(Vec{5.0});
    tape.backward(tape.sum(c));
    CHECK(tape.param_grads() == Vec{0.0});
  }
  // f(w) = w^2 at w=3: gradient 6
  {
    Tape tape(ps);
    Tape::NodeId w = tape.param("w");
    tape.backward(tape.square(w));
    CHECK(tape.param_grads()[0] == doctest::Approx(6.0).epsilon(1e-12));
  }
}

TEST_CASE("backward matches finite differences on an MLP loss") {
  // seeded MLP + squared-error loss; central differences, step 1e-5
  core::SeededRng rng(2024, 1);
  for (int seed_trial = 0; seed_trial < 5; ++seed_trial) {
    ParamStore ps;
    MlpSpec spec = spec_of({3, 6, 2}, OutputTransform::kSoftplusTail, 1);
    diffnum::mlp_init(ps, spec, "net", rng);
    Vec in{rng.normal(), rng.normal(), rng.normal()};
    Vec target{rng.normal(), rng.normal()};

    auto loss_value = [&] {
      Vec out = diffnum::mlp_eval(spec, ps, in, "net");
      double l = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) {
        l += (out[i] - target[i]) * (out[i] - target[i]);
      }
      return l;
    };

    Tape tape(ps);
    Tape::NodeId out = diffnum::mlp_forward(tape, spec, "net", tape.input(in));
    Tape::NodeId diff = tape.sub(out, tape.input(target));
    tape.backward(tape.sum(tape.square(diff)));

    Vec fd = oracles::finite_diff_grad(ps, loss_value);
    for (int i = 0; i < ps.total(); ++i) {
      CHECK(oracles::rel_err(tape.param_grads()[static_cast<std::size_t>(i)],
                             fd[static_cast<std::size_t>(i)]) < 1e-4);
    }
  }
}

TEST_CASE("tape ops gradient check") {
  // every primitive used by the losses, against finite differences
  core::SeededRng rng(11, 0);
  ParamStore ps;
  ps.add("x", {4});
  auto xs = ps.values("x");
  for (double& v : xs) v = rng.uniform(0.2, 1.5);

  auto build = [&](Tape& tape) {
    Tape::NodeId x = tape.param("x");
    Tape::NodeId a = tape.softplus(tape.scale(x, 0.7));
    Tape::NodeId b = tape.log_op(tape.add_const(tape.square(x), 0.5));
    Tape::NodeId c = tape.sqrt_op(tape.recip(tape.add_const(a, 1.0)));
    Tape::NodeId d = tape.mul(tape.tanh_op(b), tape.exp_op(tape.neg(c)));
    Tape::NodeId e = tape.min2(d, tape.clamp(x, 0.3, 1.2));
    Tape::NodeId f = tape.concat(tape.slice(e, 1, 3), tape.clamp_min(d, 0.4));
    return tape.add(tape.sum(f), tape.dot(a, b));
  };

  Tape tape(ps);
  tape.backward(build(tape));
  auto loss = [&] {
    Tape t2(ps);
    return t2.scalar(build(t2));
  };
  Vec fd = oracles::finite_diff_grad(ps, loss);
  for (int i = 0; i < ps.total(); ++i) {
    CHECK(oracles::rel_err(tape.param_grads()[static_cast<std::size_t>(i)],
                           fd[static_cast<std::size_t>(i)]) < 1e-4);
  }
  CHECK(tape.replay_check());
}

TEST_CASE("forward determinism") {
  core::SeededRng rng(31, 2);
  ParamStore ps;
  MlpSpec spec = spec_of({2, 16, 16, 2});
  diffnum::mlp_init(ps, spec, "net", rng);
  Vec in{0.123456789, -3.14};
  Vec a = diffnum::mlp_eval(spec, ps, in, "net");
  Vec b = diffnum::mlp_eval(spec, ps, in, "net");
  CHECK(a == b);
}

TEST_CASE("sgd closed forms") {
  ParamStore ps;
  ps.add("w", {1});
  ps.values("w")[0] = 1.0;

  diffnum::sgd_step(ps, Vec{0.0}, 0.1);
  CHECK(ps.values("w")[0] == 1.0);

  diffnum::sgd_step(ps, Vec{2.0}, 0.1);
  CHECK(ps.values("w")[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("sgd rejects non-finite gradients by name") {
  ParamStore ps;
  ps.add("alpha", {2});
  ps.add("beta", {2});
  ps.values("beta")[1] = 7.0;
  Vec g{0.0, 0.0, 0.0, std::nan("")};
  CHECK_THROWS_WITH_AS(diffnum::sgd_step(ps, g, 0.1),
                       doctest::Contains("beta"), std::runtime_error);
  CHECK(ps.values("beta")[1] == 7.0);  // untouched
}

TEST_CASE("sgd converges on a quadratic") {
  // (w-3)^2 contracts by 0.8 per step at lr 0.1
  ParamStore ps;
  ps.add("w", {1});
  ps.values("w")[0] = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double w = ps.values("w")[0];
    diffnum::sgd_step(ps, Vec{2.0 * (w - 3.0)}, 0.1);
  }
  CHECK(std::abs(ps.values("w")[0] - 3.0) < 1e-6);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  core::SeededRng rng(123, 5);
  ParamStore ps;
  diffnum::mlp_init(ps, spec_of({3, 8, 2}), "f_phi", rng);
  diffnum::mlp_init(ps, spec_of({2, 4, 1}), "value", rng);
  ps.add("prior.f0", {2});
  ps.values("prior.f0")[0] = -0.3333333333333333;
  ps.values("prior.f0")[1] = 1e-300;

  const auto dir = std::filesystem::temp_directory_path() / "dypol_ckpt_test";
  std::filesystem::remove_all(dir);
  diffnum::save_checkpoint(ps, dir);
  ParamStore back = diffnum::load_checkpoint(dir);

  REQUIRE(back.total() == ps.total());
  CHECK(back.data() == ps.data());
  CHECK(back.checksum() == ps.checksum());
  for (const auto& e : ps.entries()) {
    CHECK(back.entry(e.name).offset == e.offset);
    CHECK(back.entry(e.name).shape == e.shape);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("duplicate parameter names are rejected") {
  ParamStore ps;
  ps.add("w", {2, 2});
  CHECK_THROWS_AS(ps.add("w", {1}), std::invalid_argument);
}
