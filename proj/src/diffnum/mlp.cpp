#include "dypol/diffnum/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace dypol::diffnum {

void MlpSpec::validate() const {
  if (widths.size() < 2) {
    throw std::invalid_argument("MlpSpec: need at least [in, out]");
  }
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("MlpSpec: widths must be >= 1");
  }
  if (output == OutputTransform::kSoftplusTail &&
      (tail_len < 1 || tail_len > widths.back())) {
    throw std::invalid_argument("MlpSpec: bad tail_len");
  }
}

static std::string wname(const std::string& prefix, int i) {
  return prefix + ".W" + std::to_string(i);
}
static std::string bname(const std::string& prefix, int i) {
  return prefix + ".b" + std::to_string(i);
}

void mlp_init(ParamStore& params, const MlpSpec& spec, const std::string& prefix,
              core::SeededRng& rng) {
  spec.validate();
  for (int l = 0; l < spec.layers(); ++l) {
    const int in = spec.widths[static_cast<std::size_t>(l)];
    const int out = spec.widths[static_cast<std::size_t>(l) + 1];
    params.add(wname(prefix, l), {out, in});
    params.add(bname(prefix, l), {out});
    const double bound = std::sqrt(6.0 / (in + out));
    auto w = params.values(wname(prefix, l));
    for (double& v : w) v = rng.uniform(-bound, bound);
    // biases stay zero
  }
}

Tape::NodeId mlp_forward(Tape& tape, const MlpSpec& spec,
                         const std::string& prefix, Tape::NodeId x) {
  Tape::NodeId h = x;
  for (int l = 0; l < spec.layers(); ++l) {
    h = tape.affine(wname(prefix, l), bname(prefix, l), h);
    if (l + 1 < spec.layers()) {
      h = spec.activation == Activation::kTanh ? tape.tanh_op(h) : tape.relu(h);
    }
  }
  if (spec.output == OutputTransform::kSoftplusTail) {
    const int out = spec.out_dim();
    const int head = out - spec.tail_len;
    Tape::NodeId tail =
        tape.add_const(tape.softplus(tape.slice(h, head, spec.tail_len)),
                       spec.tail_floor);
    h = head > 0 ? tape.concat(tape.slice(h, 0, head), tail) : tail;
  }
  return h;
}

Vec mlp_eval(const MlpSpec& spec, const ParamStore& params,
             std::span<const double> x, const std::string& prefix) {
  if (static_cast<int>(x.size()) != spec.in_dim()) {
    throw std::invalid_argument("mlp_eval: input length mismatch for " + prefix);
  }
  Vec h(x.begin(), x.end());
  Vec next;
  for (int l = 0; l < spec.layers(); ++l) {
    const auto W = params.values(wname(prefix, l));
    const auto b = params.values(bname(prefix, l));
    const int in = spec.widths[static_cast<std::size_t>(l)];
    const int out = spec.widths[static_cast<std::size_t>(l) + 1];
    next.assign(static_cast<std::size_t>(out), 0.0);
    for (int i = 0; i < out; ++i) {
      double acc = b[static_cast<std::size_t>(i)];
      const double* row = W.data() + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += row[j] * h[static_cast<std::size_t>(j)];
      next[static_cast<std::size_t>(i)] = acc;
    }
    h.swap(next);
    if (l + 1 < spec.layers()) {
      if (spec.activation == Activation::kTanh) {
        for (double& v : h) v = std::tanh(v);
      } else {
        for (double& v : h) v = v > 0.0 ? v : 0.0;
      }
    }
  }
  if (spec.output == OutputTransform::kSoftplusTail) {
    for (int i = spec.out_dim() - spec.tail_len; i < spec.out_dim(); ++i) {
      double& v = h[static_cast<std::size_t>(i)];
      v = (v > 30.0 ? v : std::log1p(std::exp(v))) + spec.tail_floor;
    }
  }
  return h;
}

}  // namespace dypol::diffnum
