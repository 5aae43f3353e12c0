#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dypol/core/types.hpp"
#include "dypol/diffnum/param_store.hpp"

namespace dypol::diffnum {

// Reverse-mode tape over vector-valued nodes. Nodes are appended in
// evaluation order, so creation order is already a topological order and
// backward() is a single reverse sweep. Parameter gradients accumulate into
// a flat buffer aligned with the ParamStore the tape was built over.
class Tape {
 public:
  using NodeId = int;
  using CustomForward = std::function<Vec(const std::vector<const Vec*>&)>;
  using CustomBackward =
      std::function<void(const Vec& out_grad, const std::vector<const Vec*>& in_values,
                         const std::vector<Vec*>& in_grads)>;

  explicit Tape(const ParamStore& params);

  // Leaves.
  NodeId input(Vec v);
  NodeId param(const std::string& name);  // tracks gradient into the store

  // Affine layer y = W x + b with W shaped [out, in] row-major.
  NodeId affine(const std::string& w_name, const std::string& b_name, NodeId x);

  // Elementwise.
  NodeId tanh_op(NodeId x);
  NodeId relu(NodeId x);
  NodeId softplus(NodeId x);  // log1p(exp(x)), stable for large x
  NodeId exp_op(NodeId x);
  NodeId log_op(NodeId x);
  NodeId sqrt_op(NodeId x);
  NodeId square(NodeId x);
  NodeId recip(NodeId x);
  NodeId neg(NodeId x);
  NodeId scale(NodeId x, double c);
  NodeId add_const(NodeId x, double c);
  NodeId clamp_min(NodeId x, double lo);          // zero grad where clamped
  NodeId clamp(NodeId x, double lo, double hi);   // zero grad where clamped

  // Binary (equal lengths).
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId min2(NodeId a, NodeId b);  // subgradient to the smaller operand

  // Shape.
  NodeId concat(NodeId a, NodeId b);
  NodeId slice(NodeId x, int begin, int len);

  // Reductions (length-1 outputs).
  NodeId sum(NodeId x);
  NodeId dot(NodeId a, NodeId b);

  // Escape hatch for analytically differentiated foreign computations.
  NodeId custom(std::vector<NodeId> inputs, CustomForward fwd, CustomBackward bwd);

  const Vec& value(NodeId id) const;
  double scalar(NodeId id) const;  // length-1 nodes
  int size(NodeId id) const;

  // Reverse sweep from `id`. Seeds 1.0 when no seed is given (scalar output).
  // Gradients from repeated calls accumulate until zero_grad().
  void backward(NodeId id);
  void backward(NodeId id, const Vec& seed);
  void zero_grad();

  const Vec& param_grads() const { return param_grads_; }
  const Vec& node_grad(NodeId id) const;

  // Recomputes every node from its operands and checks the recorded values
  // are reproduced bitwise. Returns false on the first mismatch.
  bool replay_check() const;

  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op : std::uint8_t {
    kInput, kParam, kAffine, kTanh, kRelu, kSoftplus, kExp, kLog, kSqrt,
    kSquare, kRecip, kNeg, kScale, kAddConst, kClampMin, kClamp, kAdd, kSub,
    kMul, kMin2, kConcat, kSlice, kSum, kDot, kCustom,
  };

  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    int aux_i = -1;       // affine meta index / slice begin / param offset / custom index
    int aux_j = 0;        // slice length
    double c0 = 0.0;      // scale/addconst/clamp lo
    double c1 = 0.0;      // clamp hi
    Vec value;
    Vec grad;
  };

  struct AffineMeta {
    int w_off, b_off, in, out;
  };

  struct CustomMeta {
    std::vector<NodeId> inputs;
    CustomForward fwd;
    CustomBackward bwd;
  };

  NodeId push(Node n);
  Vec eval_node(const Node& n) const;  // recompute from operands (replay)
  void backprop_node(NodeId id);

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<AffineMeta> affines_;
  std::vector<CustomMeta> customs_;
  Vec param_grads_;
};

}  // namespace dypol::diffnum
