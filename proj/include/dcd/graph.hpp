#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcd/tensor.hpp"

namespace dcd {

enum class Op : std::uint8_t {
  kInput,
  kConstant,
  kAffine,     // x(B,m), W(m,n), b(n) -> x*W + b
  kMatmul,     // general product with transpose flags (gradient closure of kAffine)
  kAdd,
  kMul,
  kScale,      // multiply by a fixed factor
  kSum,
  kMean,
  kSquare,
  kGelu,       // exact erf form x*Phi(x)
  kSilu,
  kSigmoid,
  kNormCdf,
  kNormPdf,
  kDot,        // row-wise dot product
  kConcat,     // along columns
  kSlice,      // column range
  kPad,        // place into zero-filled wider matrix (gradient of kSlice)
  kBroadcast,
};

const char* op_name(Op op);

enum class Axis : std::uint8_t { kAll, kBatch, kCols };

enum class BroadcastKind : std::uint8_t {
  kScalar,     // () -> any
  kRowVector,  // (c,) -> (r,c), replicated down the rows
  kColVector,  // (r,) -> (r,c), replicated across the columns
};

struct NodeId {
  std::int32_t v = -1;
  bool valid() const { return v >= 0; }
  bool operator==(const NodeId& o) const { return v == o.v; }
};

struct Node {
  NodeId id;
  Op op = Op::kInput;
  std::vector<NodeId> parents;
  Shape shape;
  // per-op attributes
  double factor = 1.0;               // kScale
  Axis axis = Axis::kAll;            // kSum / kMean
  bool trans_a = false;              // kMatmul
  bool trans_b = false;              // kMatmul
  Index begin = 0, end = 0;          // kSlice: [begin,end); kPad: begin = offset, end = total cols
  BroadcastKind bcast = BroadcastKind::kScalar;
  Tensor value;                      // kConstant payload
};

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Forward evaluation produced a NaN or Inf; carries the producing node.
struct NonFiniteError : GraphError {
  NonFiniteError(NodeId node, Op op)
      : GraphError("non-finite value produced by node " + std::to_string(node.v) + " (" + op_name(op) + ")"),
        node(node) {}
  NodeId node;
};

using Bindings = std::unordered_map<std::int32_t, Tensor>;

/// Append-only computation tape. backward passes (grad) append new nodes and
/// never mutate existing ones, so expressions produced by grad are themselves
/// differentiable to any order.
class Graph {
 public:
  // -- construction ---------------------------------------------------------
  NodeId input(Shape shape);
  NodeId constant(Tensor value);
  NodeId affine(NodeId x, NodeId w, NodeId b);
  NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b) { return add(a, scale(b, -1.0)); }
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId sum(NodeId x, Axis axis = Axis::kAll);
  NodeId mean(NodeId x, Axis axis = Axis::kAll);
  NodeId square(NodeId x);
  NodeId gelu(NodeId x);
  NodeId silu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId norm_cdf(NodeId x);
  NodeId norm_pdf(NodeId x);
  NodeId dot(NodeId a, NodeId b);
  NodeId concat(NodeId a, NodeId b);
  NodeId slice_cols(NodeId x, Index begin, Index end);
  NodeId pad_cols(NodeId x, Index total_cols, Index offset);
  NodeId broadcast(NodeId x, Shape target, BroadcastKind kind);

  // -- evaluation -----------------------------------------------------------
  /// Forward value of `out`. Intermediates are cached for the duration of the
  /// call and released as soon as their last consumer has run.
  Tensor eval(NodeId out, const Bindings& bindings) const;
  /// Evaluates several outputs sharing one cache, so common subexpressions
  /// (e.g. the forward pass under a gradient) are computed once.
  std::vector<Tensor> eval(std::span<const NodeId> outs, const Bindings& bindings) const;

  // -- differentiation ------------------------------------------------------
  /// Appends nodes computing d(scalar)/d(wrt_i) and returns their ids. A wrt
  /// node that `scalar` does not depend on yields a structural zero constant.
  std::vector<NodeId> grad(NodeId scalar, std::span<const NodeId> wrt);
  std::vector<NodeId> grad(NodeId scalar, std::initializer_list<NodeId> wrt) {
    return grad(scalar, std::span<const NodeId>(wrt.begin(), wrt.size()));
  }
  NodeId grad1(NodeId scalar, NodeId wrt) { return grad(scalar, {wrt})[0]; }

  // -- introspection --------------------------------------------------------
  const Node& node(NodeId id) const { return nodes_.at(static_cast<size_t>(id.v)); }
  std::size_t size() const { return nodes_.size(); }
  /// True when `out` transitively depends on `in` (used to verify detachment).
  bool depends_on(NodeId out, NodeId in) const;

 private:
  NodeId append(Node n);
  const Node& at(NodeId id) const { return nodes_[static_cast<size_t>(id.v)]; }
  void check_rank2(NodeId id, const char* what) const;
  NodeId reduce(NodeId x, Axis axis, Op op);
  // gradient contribution of `n` to parent `pi` given adjoint `g`
  NodeId parent_adjoint(const Node& n, std::size_t pi, NodeId g);

  std::vector<Node> nodes_;
  // epoch-stamped scratch so grad costs O(subgraph), not O(whole tape)
  std::vector<std::uint64_t> anc_mark_, wrt_mark_;
  std::uint64_t epoch_ = 0;
  // pure unary results are shared: repeated backward passes ask for the same
  // norm_cdf/norm_pdf/sigmoid chains many times over
  std::unordered_map<std::uint64_t, NodeId> unary_memo_;
  NodeId memo_unary(Op op, NodeId x);
};

/// Central-difference gradient of a scalar function, the independent oracle
/// used to cross-check grad.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

}  // namespace dcd
