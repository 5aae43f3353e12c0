#include "dypol/diffnum/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dypol::diffnum {

namespace {
double softplus_scalar(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Tape::Tape(const ParamStore& params) : params_(&params) {
  param_grads_.assign(static_cast<std::size_t>(params.total()), 0.0);
}

Tape::NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

Tape::NodeId Tape::input(Vec v) {
  Node n;
  n.op = Op::kInput;
  n.value = std::move(v);
  return push(std::move(n));
}

Tape::NodeId Tape::param(const std::string& name) {
  const ParamStore::Entry& e = params_->entry(name);
  Node n;
  n.op = Op::kParam;
  n.aux_i = e.offset;
  n.value.assign(params_->data().begin() + e.offset,
                 params_->data().begin() + e.offset + e.size);
  return push(std::move(n));
}

Tape::NodeId Tape::affine(const std::string& w_name, const std::string& b_name,
                          NodeId x) {
  const ParamStore::Entry& we = params_->entry(w_name);
  const ParamStore::Entry& be = params_->entry(b_name);
  if (we.shape.size() != 2) {
    throw std::invalid_argument("affine: weight must be 2-d: " + w_name);
  }
  const int out = we.shape[0];
  const int in = we.shape[1];
  if (in != size(x) || be.size != out) {
    throw std::invalid_argument("affine: shape mismatch at " + w_name);
  }
  AffineMeta m{we.offset, be.offset, in, out};
  affines_.push_back(m);

  Node n;
  n.op = Op::kAffine;
  n.a = x;
  n.aux_i = static_cast<int>(affines_.size()) - 1;
  n.value = eval_node(n);
  return push(std::move(n));
}

#define DYPOL_UNARY(NAME, OP)                \
  Tape::NodeId Tape::NAME(NodeId x) {        \
    Node n;                                  \
    n.op = OP;                               \
    n.a = x;                                 \
    n.value = eval_node(n);                  \
    return push(std::move(n));               \
  }

DYPOL_UNARY(tanh_op, Op::kTanh)
DYPOL_UNARY(relu, Op::kRelu)
DYPOL_UNARY(softplus, Op::kSoftplus)
DYPOL_UNARY(exp_op, Op::kExp)
DYPOL_UNARY(log_op, Op::kLog)
DYPOL_UNARY(sqrt_op, Op::kSqrt)
DYPOL_UNARY(square, Op::kSquare)
DYPOL_UNARY(recip, Op::kRecip)
DYPOL_UNARY(neg, Op::kNeg)
#undef DYPOL_UNARY

Tape::NodeId Tape::scale(NodeId x, double c) {
  Node n;
  n.op = Op::kScale;
  n.a = x;
  n.c0 = c;
  n.value = eval_node(n);
  return push(std::move(n));
}

Tape::NodeId Tape::add_const(NodeId x, double c) {
  Node n;
  n.op = Op::kAddConst;
  n.a = x;
  n.c0 = c;
  n.value = eval_node(n);
  return push(std::move(n));
}

Tape::NodeId Tape::clamp_min(NodeId x, double lo) {
  Node n;
  n.op = Op::kClampMin;
  n.a = x;
  n.c0 = lo;
  n.value = eval_node(n);
  return push(std::move(n));
}

Tape::NodeId Tape::clamp(NodeId x, double lo, double hi) {
  Node n;
  n.op = Op::kClamp;
  n.a = x;
  n.c0 = lo;
  n.c1 = hi;
  n.value = eval_node(n);
  return push(std::move(n));
}

#define DYPOL_BINARY(NAME, OP)                            \
  Tape::NodeId Tape::NAME(NodeId a, NodeId b) {           \
    if (size(a) != size(b))                               \
      throw std::invalid_argument(#NAME ": length mismatch"); \
    Node n;                                               \
    n.op = OP;                                            \
    n.a = a;                                              \
    n.b = b;                                              \
    n.value = eval_node(n);                               \
    return push(std::move(n));                            \
  }

DYPOL_BINARY(add, Op::kAdd)
DYPOL_BINARY(sub, Op::kSub)
DYPOL_BINARY(mul, Op::kMul)
DYPOL_BINARY(min2, Op::kMin2)
#undef DYPOL_BINARY

Tape::NodeId Tape::concat(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kConcat;
  n.a = a;
  n.b = b;
  n.value = eval_node(n);
  return push(std::move(n));
}

Tape::NodeId Tape::slice(NodeId x, int begin, int len) {
  if (begin < 0 || len < 0 || begin + len > size(x)) {
    throw std::invalid_argument("slice: out of range");
  }
  Node n;
  n.op = Op::kSlice;
  n.a = x;
  n.aux_i = begin;
  n.aux_j = len;
  n.value = eval_node(n);
  return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId x) {
  Node n;
  n.op = Op::kSum;
  n.a = x;
  n.value = eval_node(n);
  return push(std::move(n));
}

Tape::NodeId Tape::dot(NodeId a, NodeId b) {
  if (size(a) != size(b)) throw std::invalid_argument("dot: length mismatch");
  Node n;
  n.op = Op::kDot;
  n.a = a;
  n.b = b;
  n.value = eval_node(n);
  return push(std::move(n));
}

Tape::NodeId Tape::custom(std::vector<NodeId> inputs, CustomForward fwd,
                          CustomBackward bwd) {
  CustomMeta meta;
  meta.inputs = std::move(inputs);
  meta.fwd = std::move(fwd);
  meta.bwd = std::move(bwd);
  customs_.push_back(std::move(meta));

  Node n;
  n.op = Op::kCustom;
  n.aux_i = static_cast<int>(customs_.size()) - 1;
  n.value = eval_node(n);
  return push(std::move(n));
}

Vec Tape::eval_node(const Node& n) const {
  auto in = [&](NodeId id) -> const Vec& { return nodes_[static_cast<std::size_t>(id)].value; };
  switch (n.op) {
    case Op::kInput:
      return n.value;  // leaves replay to themselves
    case Op::kParam: {
      // Reads the store as of tape construction; params must not change
      // while a tape is alive.
      return Vec(params_->data().begin() + n.aux_i,
                 params_->data().begin() + n.aux_i + static_cast<long>(n.value.size()));
    }
    case Op::kAffine: {
      const AffineMeta& m = affines_[static_cast<std::size_t>(n.aux_i)];
      const double* W = params_->data().data() + m.w_off;
      const double* b = params_->data().data() + m.b_off;
      const Vec& x = in(n.a);
      Vec y(static_cast<std::size_t>(m.out));
      for (int i = 0; i < m.out; ++i) {
        double acc = b[i];
        const double* row = W + static_cast<std::size_t>(i) * m.in;
        for (int j = 0; j < m.in; ++j) acc += row[j] * x[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = acc;
      }
      return y;
    }
    case Op::kTanh: {
      Vec y = in(n.a);
      for (double& v : y) v = std::tanh(v);
      return y;
    }
    case Op::kRelu: {
      Vec y = in(n.a);
      for (double& v : y) v = v > 0.0 ? v : 0.0;
      return y;
    }
    case Op::kSoftplus: {
      Vec y = in(n.a);
      for (double& v : y) v = softplus_scalar(v);
      return y;
    }
    case Op::kExp: {
      Vec y = in(n.a);
      for (double& v : y) v = std::exp(v);
      return y;
    }
    case Op::kLog: {
      Vec y = in(n.a);
      for (double& v : y) v = std::log(v);
      return y;
    }
    case Op::kSqrt: {
      Vec y = in(n.a);
      for (double& v : y) v = std::sqrt(v);
      return y;
    }
    case Op::kSquare: {
      Vec y = in(n.a);
      for (double& v : y) v = v * v;
      return y;
    }
    case Op::kRecip: {
      Vec y = in(n.a);
      for (double& v : y) v = 1.0 / v;
      return y;
    }
    case Op::kNeg: {
      Vec y = in(n.a);
      for (double& v : y) v = -v;
      return y;
    }
    case Op::kScale: {
      Vec y = in(n.a);
      for (double& v : y) v *= n.c0;
      return y;
    }
    case Op::kAddConst: {
      Vec y = in(n.a);
      for (double& v : y) v += n.c0;
      return y;
    }
    case Op::kClampMin: {
      Vec y = in(n.a);
      for (double& v : y) v = v < n.c0 ? n.c0 : v;
      return y;
    }
    case Op::kClamp: {
      Vec y = in(n.a);
      for (double& v : y) v = std::clamp(v, n.c0, n.c1);
      return y;
    }
    case Op::kAdd: {
      Vec y = in(n.a);
      const Vec& b = in(n.b);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
      return y;
    }
    case Op::kSub: {
      Vec y = in(n.a);
      const Vec& b = in(n.b);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b[i];
      return y;
    }
    case Op::kMul: {
      Vec y = in(n.a);
      const Vec& b = in(n.b);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b[i];
      return y;
    }
    case Op::kMin2: {
      Vec y = in(n.a);
      const Vec& b = in(n.b);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(y[i], b[i]);
      return y;
    }
    case Op::kConcat: {
      Vec y = in(n.a);
      const Vec& b = in(n.b);
      y.insert(y.end(), b.begin(), b.end());
      return y;
    }
    case Op::kSlice: {
      const Vec& x = in(n.a);
      return Vec(x.begin() + n.aux_i, x.begin() + n.aux_i + n.aux_j);
    }
    case Op::kSum: {
      double acc = 0.0;
      for (double v : in(n.a)) acc += v;
      return Vec{acc};
    }
    case Op::kDot: {
      const Vec& a = in(n.a);
      const Vec& b = in(n.b);
      double acc = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
      return Vec{acc};
    }
    case Op::kCustom: {
      const CustomMeta& m = customs_[static_cast<std::size_t>(n.aux_i)];
      std::vector<const Vec*> ins;
      ins.reserve(m.inputs.size());
      for (NodeId id : m.inputs) ins.push_back(&in(id));
      return m.fwd(ins);
    }
  }
  throw std::logic_error("Tape: unreachable op");
}

const Vec& Tape::value(NodeId id) const {
  return nodes_[static_cast<std::size_t>(id)].value;
}

double Tape::scalar(NodeId id) const {
  const Vec& v = value(id);
  if (v.size() != 1) throw std::invalid_argument("scalar: node is not length 1");
  return v[0];
}

int Tape::size(NodeId id) const {
  return static_cast<int>(nodes_[static_cast<std::size_t>(id)].value.size());
}

void Tape::zero_grad() {
  std::fill(param_grads_.begin(), param_grads_.end(), 0.0);
  for (Node& n : nodes_) n.grad.clear();
}

const Vec& Tape::node_grad(NodeId id) const {
  return nodes_[static_cast<std::size_t>(id)].grad;
}

void Tape::backward(NodeId id) {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  backward(id, Vec(n.value.size(), 1.0));
}

void Tape::backward(NodeId id, const Vec& seed) {
  Node& out = nodes_[static_cast<std::size_t>(id)];
  if (seed.size() != out.value.size()) {
    throw std::invalid_argument("backward: seed length mismatch");
  }
  if (out.grad.empty()) out.grad.assign(out.value.size(), 0.0);
  for (std::size_t i = 0; i < seed.size(); ++i) out.grad[i] += seed[i];
  for (NodeId i = id; i >= 0; --i) backprop_node(i);
}

void Tape::backprop_node(NodeId id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) return;  // not on any path to the output

  auto grad_of = [&](NodeId child) -> Vec& {
    Node& c = nodes_[static_cast<std::size_t>(child)];
    if (c.grad.empty()) c.grad.assign(c.value.size(), 0.0);
    return c.grad;
  };
  auto val_of = [&](NodeId child) -> const Vec& {
    return nodes_[static_cast<std::size_t>(child)].value;
  };

  const Vec& g = n.grad;
  switch (n.op) {
    case Op::kInput:
      break;
    case Op::kParam: {
      for (std::size_t i = 0; i < g.size(); ++i) {
        param_grads_[static_cast<std::size_t>(n.aux_i) + i] += g[i];
      }
      break;
    }
    case Op::kAffine: {
      const AffineMeta& m = affines_[static_cast<std::size_t>(n.aux_i)];
      const double* W = params_->data().data() + m.w_off;
      const Vec& x = val_of(n.a);
      Vec& gx = grad_of(n.a);
      double* gW = param_grads_.data() + m.w_off;
      double* gb = param_grads_.data() + m.b_off;
      for (int i = 0; i < m.out; ++i) {
        const double gi = g[static_cast<std::size_t>(i)];
        if (gi == 0.0) continue;
        const double* row = W + static_cast<std::size_t>(i) * m.in;
        double* grow = gW + static_cast<std::size_t>(i) * m.in;
        for (int j = 0; j < m.in; ++j) {
          gx[static_cast<std::size_t>(j)] += gi * row[j];
          grow[j] += gi * x[static_cast<std::size_t>(j)];
        }
        gb[i] += gi;
      }
      break;
    }
    case Op::kTanh: {
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = n.value[i];
        gx[i] += g[i] * (1.0 - y * y);
      }
      break;
    }
    case Op::kRelu: {
      const Vec& x = val_of(n.a);
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > 0.0) gx[i] += g[i];
      }
      break;
    }
    case Op::kSoftplus: {
      const Vec& x = val_of(n.a);
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sigmoid(x[i]);
      break;
    }
    case Op::kExp: {
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.value[i];
      break;
    }
    case Op::kLog: {
      const Vec& x = val_of(n.a);
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / x[i];
      break;
    }
    case Op::kSqrt: {
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        gx[i] += g[i] * 0.5 / n.value[i];
      }
      break;
    }
    case Op::kSquare: {
      const Vec& x = val_of(n.a);
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * 2.0 * x[i];
      break;
    }
    case Op::kRecip: {
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        gx[i] -= g[i] * n.value[i] * n.value[i];
      }
      break;
    }
    case Op::kNeg: {
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
      break;
    }
    case Op::kScale: {
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.c0;
      break;
    }
    case Op::kAddConst: {
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      break;
    }
    case Op::kClampMin: {
      const Vec& x = val_of(n.a);
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] >= n.c0) gx[i] += g[i];
      }
      break;
    }
    case Op::kClamp: {
      const Vec& x = val_of(n.a);
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] >= n.c0 && x[i] <= n.c1) gx[i] += g[i];
      }
      break;
    }
    case Op::kAdd: {
      Vec& ga = grad_of(n.a);
      Vec& gb = grad_of(n.b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
      break;
    }
    case Op::kSub: {
      Vec& ga = grad_of(n.a);
      Vec& gb = grad_of(n.b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        gb[i] -= g[i];
      }
      break;
    }
    case Op::kMul: {
      const Vec& a = val_of(n.a);
      const Vec& b = val_of(n.b);
      Vec& ga = grad_of(n.a);
      Vec& gb = grad_of(n.b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * b[i];
        gb[i] += g[i] * a[i];
      }
      break;
    }
    case Op::kMin2: {
      const Vec& a = val_of(n.a);
      const Vec& b = val_of(n.b);
      Vec& ga = grad_of(n.a);
      Vec& gb = grad_of(n.b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a[i] <= b[i]) {
          ga[i] += g[i];
        } else {
          gb[i] += g[i];
        }
      }
      break;
    }
    case Op::kConcat: {
      Vec& ga = grad_of(n.a);
      Vec& gb = grad_of(n.b);
      const std::size_t na = ga.size();
      for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
      break;
    }
    case Op::kSlice: {
      Vec& gx = grad_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        gx[static_cast<std::size_t>(n.aux_i) + i] += g[i];
      }
      break;
    }
    case Op::kSum: {
      Vec& gx = grad_of(n.a);
      for (double& v : gx) v += g[0];
      break;
    }
    case Op::kDot: {
      const Vec& a = val_of(n.a);
      const Vec& b = val_of(n.b);
      Vec& ga = grad_of(n.a);
      Vec& gb = grad_of(n.b);
      for (std::size_t i = 0; i < a.size(); ++i) {
        ga[i] += g[0] * b[i];
        gb[i] += g[0] * a[i];
      }
      break;
    }
    case Op::kCustom: {
      const CustomMeta& m = customs_[static_cast<std::size_t>(n.aux_i)];
      std::vector<const Vec*> ins;
      std::vector<Vec*> grads;
      ins.reserve(m.inputs.size());
      grads.reserve(m.inputs.size());
      for (NodeId cid : m.inputs) {
        ins.push_back(&val_of(cid));
        grads.push_back(&grad_of(cid));
      }
      m.bwd(g, ins, grads);
      break;
    }
  }
}

bool Tape::replay_check() const {
  for (const Node& n : nodes_) {
    Vec v = eval_node(n);
    if (v.size() != n.value.size()) return false;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] != n.value[i]) return false;
    }
  }
  return true;
}

}  // namespace dypol::diffnum
