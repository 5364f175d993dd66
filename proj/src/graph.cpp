#include "dcd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace dcd {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399;

double norm_cdf_scalar(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
double norm_pdf_scalar(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

Index reduced_count(const Shape& in, Axis axis) {
  switch (axis) {
    case Axis::kAll: return in.count();
    case Axis::kBatch: return in.rows();
    case Axis::kCols: return in.cols();
  }
  return 1;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kConstant: return "constant";
    case Op::kAffine: return "affine";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSquare: return "square";
    case Op::kGelu: return "gelu";
    case Op::kSilu: return "silu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kNormCdf: return "norm_cdf";
    case Op::kNormPdf: return "norm_pdf";
    case Op::kDot: return "dot";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kPad: return "pad";
    case Op::kBroadcast: return "broadcast";
  }
  return "?";
}

NodeId Graph::append(Node n) {
  n.id = NodeId{static_cast<std::int32_t>(nodes_.size())};
  for (NodeId p : n.parents) {
    if (!p.valid() || p.v >= n.id.v) throw GraphError("parent id out of order");
  }
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

void Graph::check_rank2(NodeId id, const char* what) const {
  if (at(id).shape.rank() != 2)
    throw GraphError(std::string(what) + ": expected rank-2 operand, got shape " + at(id).shape.str());
}

NodeId Graph::input(Shape shape) {
  Node n;
  n.op = Op::kInput;
  n.shape = std::move(shape);
  return append(std::move(n));
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.shape = value.shape();
  n.value = std::move(value);
  return append(std::move(n));
}

NodeId Graph::affine(NodeId x, NodeId w, NodeId b) {
  check_rank2(x, "affine");
  check_rank2(w, "affine");
  if (at(b).shape.rank() != 1) throw GraphError("affine: bias must be rank-1");
  if (at(x).shape.cols() != at(w).shape.rows() || at(w).shape.cols() != at(b).shape.rows())
    throw GraphError("affine: incompatible shapes " + at(x).shape.str() + " " + at(w).shape.str() + " " +
                     at(b).shape.str());
  Node n;
  n.op = Op::kAffine;
  n.parents = {x, w, b};
  n.shape = Shape{at(x).shape.rows(), at(w).shape.cols()};
  return append(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  const Shape& sa = at(a).shape;
  const Shape& sb = at(b).shape;
  Index am = trans_a ? sa.cols() : sa.rows();
  Index ak = trans_a ? sa.rows() : sa.cols();
  Index bk = trans_b ? sb.cols() : sb.rows();
  Index bn = trans_b ? sb.rows() : sb.cols();
  if (ak != bk) throw GraphError("matmul: inner dimensions disagree: " + sa.str() + " x " + sb.str());
  Node n;
  n.op = Op::kMatmul;
  n.parents = {a, b};
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  n.shape = Shape{am, bn};
  return append(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  if (at(a).shape != at(b).shape)
    throw GraphError("add: shape mismatch " + at(a).shape.str() + " vs " + at(b).shape.str());
  Node n;
  n.op = Op::kAdd;
  n.parents = {a, b};
  n.shape = at(a).shape;
  return append(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  if (at(a).shape != at(b).shape)
    throw GraphError("mul: shape mismatch " + at(a).shape.str() + " vs " + at(b).shape.str());
  Node n;
  n.op = Op::kMul;
  n.parents = {a, b};
  n.shape = at(a).shape;
  return append(std::move(n));
}

NodeId Graph::scale(NodeId x, double factor) {
  Node n;
  n.op = Op::kScale;
  n.parents = {x};
  n.factor = factor;
  n.shape = at(x).shape;
  return append(std::move(n));
}

NodeId Graph::reduce(NodeId x, Axis axis, Op op) {
  const Shape& s = at(x).shape;
  Node n;
  n.op = op;
  n.parents = {x};
  n.axis = axis;
  if (axis == Axis::kAll) {
    if (s.rank() == 0) throw GraphError("sum: scalar operand");
    n.shape = Shape{};
  } else {
    if (s.rank() != 2) throw GraphError("sum: axis reduction needs a rank-2 operand");
    n.shape = axis == Axis::kBatch ? Shape{s.cols()} : Shape{s.rows()};
  }
  return append(std::move(n));
}

NodeId Graph::sum(NodeId x, Axis axis) { return reduce(x, axis, Op::kSum); }

NodeId Graph::mean(NodeId x, Axis axis) { return reduce(x, axis, Op::kMean); }

NodeId Graph::memo_unary(Op op, NodeId x) {
  const std::uint64_t key = (std::uint64_t(static_cast<std::uint8_t>(op)) << 32) |
                            std::uint64_t(static_cast<std::uint32_t>(x.v));
  auto it = unary_memo_.find(key);
  if (it != unary_memo_.end()) return it->second;
  Node n;
  n.op = op;
  n.parents = {x};
  n.shape = at(x).shape;
  NodeId id = append(std::move(n));
  unary_memo_.emplace(key, id);
  return id;
}

NodeId Graph::square(NodeId x) { return memo_unary(Op::kSquare, x); }
NodeId Graph::gelu(NodeId x) { return memo_unary(Op::kGelu, x); }
NodeId Graph::silu(NodeId x) { return memo_unary(Op::kSilu, x); }
NodeId Graph::sigmoid(NodeId x) { return memo_unary(Op::kSigmoid, x); }
NodeId Graph::norm_cdf(NodeId x) { return memo_unary(Op::kNormCdf, x); }
NodeId Graph::norm_pdf(NodeId x) { return memo_unary(Op::kNormPdf, x); }

NodeId Graph::dot(NodeId a, NodeId b) {
  if (at(a).shape != at(b).shape)
    throw GraphError("dot: shape mismatch " + at(a).shape.str() + " vs " + at(b).shape.str());
  int r = at(a).shape.rank();
  if (r != 1 && r != 2) throw GraphError("dot: operands must be rank-1 or rank-2");
  Node n;
  n.op = Op::kDot;
  n.parents = {a, b};
  n.shape = r == 2 ? Shape{at(a).shape.rows()} : Shape{};
  return append(std::move(n));
}

NodeId Graph::concat(NodeId a, NodeId b) {
  check_rank2(a, "concat");
  check_rank2(b, "concat");
  if (at(a).shape.rows() != at(b).shape.rows()) throw GraphError("concat: row counts disagree");
  Node n;
  n.op = Op::kConcat;
  n.parents = {a, b};
  n.shape = Shape{at(a).shape.rows(), at(a).shape.cols() + at(b).shape.cols()};
  return append(std::move(n));
}

NodeId Graph::slice_cols(NodeId x, Index begin, Index end) {
  check_rank2(x, "slice");
  const Shape& s = at(x).shape;
  if (begin < 0 || end > s.cols() || begin >= end) throw GraphError("slice: bad column range");
  Node n;
  n.op = Op::kSlice;
  n.parents = {x};
  n.begin = begin;
  n.end = end;
  n.shape = Shape{s.rows(), end - begin};
  return append(std::move(n));
}

NodeId Graph::pad_cols(NodeId x, Index total_cols, Index offset) {
  check_rank2(x, "pad");
  const Shape& s = at(x).shape;
  if (offset < 0 || offset + s.cols() > total_cols) throw GraphError("pad: bad placement");
  Node n;
  n.op = Op::kPad;
  n.parents = {x};
  n.begin = offset;
  n.end = total_cols;
  n.shape = Shape{s.rows(), total_cols};
  return append(std::move(n));
}

NodeId Graph::broadcast(NodeId x, Shape target, BroadcastKind kind) {
  const Shape& s = at(x).shape;
  switch (kind) {
    case BroadcastKind::kScalar:
      if (s.rank() != 0) throw GraphError("broadcast: scalar kind needs a rank-0 source");
      break;
    case BroadcastKind::kRowVector:
      if (s.rank() != 1 || target.rank() != 2 || target.cols() != s.rows())
        throw GraphError("broadcast: row-vector kind needs (c,) -> (r,c)");
      break;
    case BroadcastKind::kColVector:
      if (s.rank() != 1 || target.rank() != 2 || target.rows() != s.rows())
        throw GraphError("broadcast: col-vector kind needs (r,) -> (r,c)");
      break;
  }
  Node n;
  n.op = Op::kBroadcast;
  n.parents = {x};
  n.bcast = kind;
  n.shape = std::move(target);
  return append(std::move(n));
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

struct EvalScratch {
  std::vector<Tensor> vals;
  std::vector<char> have;
};

}  // namespace

std::vector<Tensor> Graph::eval(std::span<const NodeId> outs, const Bindings& bindings) const {
  const auto n = nodes_.size();
  std::vector<char> needed(n, 0);
  std::vector<std::int32_t> remaining_uses(n, 0);

  {
    std::vector<NodeId> stack(outs.begin(), outs.end());
    for (NodeId o : outs)
      if (!o.valid() || static_cast<size_t>(o.v) >= n) throw GraphError("eval: invalid output node");
    while (!stack.empty()) {
      NodeId id = stack.back();
      stack.pop_back();
      if (needed[id.v]) continue;
      needed[id.v] = 1;
      for (NodeId p : at(id).parents) {
        ++remaining_uses[p.v];
        if (!needed[p.v]) stack.push_back(p);
      }
    }
  }
  // outputs stay alive to the end
  for (NodeId o : outs) ++remaining_uses[o.v];

  std::vector<Tensor> vals(n);
  std::vector<char> have(n, 0);

  auto val = [&](NodeId id) -> const Tensor& { return vals[id.v]; };

  for (std::size_t i = 0; i < n; ++i) {
    if (!needed[i]) continue;
    const Node& nd = nodes_[i];
    Tensor out;
    switch (nd.op) {
      case Op::kInput: {
        auto it = bindings.find(nd.id.v);
        if (it == bindings.end()) throw GraphError("eval: unbound input node " + std::to_string(nd.id.v));
        if (it->second.shape() != nd.shape)
          throw GraphError("eval: binding shape " + it->second.shape().str() + " does not match input " +
                           nd.shape.str());
        out = it->second;
        break;
      }
      case Op::kConstant:
        out = nd.value;
        break;
      case Op::kAffine: {
        const Tensor& x = val(nd.parents[0]);
        const Tensor& w = val(nd.parents[1]);
        const Tensor& b = val(nd.parents[2]);
        out = Tensor::zeros(nd.shape);
        out.mat().noalias() = x.mat() * w.mat();
        out.mat().rowwise() += b.vec().transpose();
        break;
      }
      case Op::kMatmul: {
        const Tensor& a = val(nd.parents[0]);
        const Tensor& b = val(nd.parents[1]);
        out = Tensor::zeros(nd.shape);
        if (!nd.trans_a && !nd.trans_b)
          out.mat().noalias() = a.mat() * b.mat();
        else if (nd.trans_a && !nd.trans_b)
          out.mat().noalias() = a.mat().transpose() * b.mat();
        else if (!nd.trans_a && nd.trans_b)
          out.mat().noalias() = a.mat() * b.mat().transpose();
        else
          out.mat().noalias() = a.mat().transpose() * b.mat().transpose();
        break;
      }
      case Op::kAdd: {
        out = val(nd.parents[0]);
        out.flat() += val(nd.parents[1]).flat();
        break;
      }
      case Op::kMul: {
        out = val(nd.parents[0]);
        out.flat() *= val(nd.parents[1]).flat();
        break;
      }
      case Op::kScale: {
        out = val(nd.parents[0]);
        out.flat() *= nd.factor;
        break;
      }
      case Op::kSum:
      case Op::kMean: {
        const Tensor& x = val(nd.parents[0]);
        if (nd.axis == Axis::kAll) {
          out = Tensor::scalar(x.flat().sum());
        } else if (nd.axis == Axis::kBatch) {
          out = Tensor::zeros(nd.shape);
          out.vec() = x.mat().colwise().sum().transpose();
        } else {
          out = Tensor::zeros(nd.shape);
          out.vec() = x.mat().rowwise().sum();
        }
        if (nd.op == Op::kMean) out.flat() /= static_cast<double>(reduced_count(x.shape(), nd.axis));
        break;
      }
      case Op::kSquare: {
        out = val(nd.parents[0]);
        out.flat() = out.flat().square();
        break;
      }
      case Op::kGelu: {
        out = val(nd.parents[0]);
        out.flat() = out.flat().unaryExpr([](double v) { return v * norm_cdf_scalar(v); });
        break;
      }
      case Op::kSilu: {
        out = val(nd.parents[0]);
        out.flat() = out.flat().unaryExpr([](double v) { return v * sigmoid_scalar(v); });
        break;
      }
      case Op::kSigmoid: {
        out = val(nd.parents[0]);
        out.flat() = out.flat().unaryExpr(&sigmoid_scalar);
        break;
      }
      case Op::kNormCdf: {
        out = val(nd.parents[0]);
        out.flat() = out.flat().unaryExpr(&norm_cdf_scalar);
        break;
      }
      case Op::kNormPdf: {
        out = val(nd.parents[0]);
        out.flat() = out.flat().unaryExpr(&norm_pdf_scalar);
        break;
      }
      case Op::kDot: {
        const Tensor& a = val(nd.parents[0]);
        const Tensor& b = val(nd.parents[1]);
        if (a.rank() == 2) {
          out = Tensor::zeros(nd.shape);
          out.vec() = (a.mat().array() * b.mat().array()).rowwise().sum();
        } else {
          out = Tensor::scalar((a.flat() * b.flat()).sum());
        }
        break;
      }
      case Op::kConcat: {
        const Tensor& a = val(nd.parents[0]);
        const Tensor& b = val(nd.parents[1]);
        out = Tensor::zeros(nd.shape);
        out.mat().leftCols(a.cols()) = a.mat();
        out.mat().rightCols(b.cols()) = b.mat();
        break;
      }
      case Op::kSlice: {
        const Tensor& x = val(nd.parents[0]);
        out = Tensor::zeros(nd.shape);
        out.mat() = x.mat().middleCols(nd.begin, nd.end - nd.begin);
        break;
      }
      case Op::kPad: {
        const Tensor& x = val(nd.parents[0]);
        out = Tensor::zeros(nd.shape);
        out.mat().middleCols(nd.begin, x.cols()) = x.mat();
        break;
      }
      case Op::kBroadcast: {
        const Tensor& x = val(nd.parents[0]);
        out = Tensor::zeros(nd.shape);
        switch (nd.bcast) {
          case BroadcastKind::kScalar:
            out.flat() = x.value();
            break;
          case BroadcastKind::kRowVector:
            out.mat().rowwise() = x.vec().transpose();
            break;
          case BroadcastKind::kColVector:
            out.mat().colwise() = x.vec();
            break;
        }
        break;
      }
    }
    if (!out.all_finite()) throw NonFiniteError(nd.id, nd.op);
    vals[i] = std::move(out);
    have[i] = 1;
    for (NodeId p : nd.parents) {
      if (--remaining_uses[p.v] == 0) vals[p.v] = Tensor();  // release early
    }
  }

  std::vector<Tensor> result;
  result.reserve(outs.size());
  for (NodeId o : outs) {
    if (!have[o.v]) throw GraphError("eval: output was not computed");
    result.push_back(vals[o.v]);
  }
  return result;
}

Tensor Graph::eval(NodeId out, const Bindings& bindings) const {
  NodeId outs[1] = {out};
  return eval(std::span<const NodeId>(outs, 1), bindings)[0];
}

// ---------------------------------------------------------------------------
// differentiation

// `n` is a caller-owned snapshot: the builder calls below may reallocate the
// node storage, so a reference into nodes_ must not be used here.
NodeId Graph::parent_adjoint(const Node& n, std::size_t pi, NodeId g) {
  NodeId a = n.parents.size() > 0 ? n.parents[0] : NodeId{};
  NodeId b = n.parents.size() > 1 ? n.parents[1] : NodeId{};
  switch (n.op) {
    case Op::kInput:
    case Op::kConstant:
      throw GraphError("leaf node has no parents");
    case Op::kAffine: {
      if (pi == 0) return matmul(g, b, false, true);
      if (pi == 1) return matmul(a, g, true, false);
      return sum(g, Axis::kBatch);
    }
    case Op::kMatmul: {
      const bool ta = n.trans_a, tb = n.trans_b;
      if (pi == 0) {
        if (!ta && !tb) return matmul(g, b, false, true);
        if (ta && !tb) return matmul(b, g, false, true);
        if (!ta && tb) return matmul(g, b, false, false);
        return matmul(b, g, true, true);
      } else {
        if (!ta && !tb) return matmul(a, g, true, false);
        if (ta && !tb) return matmul(a, g, false, false);
        if (!ta && tb) return matmul(g, a, true, false);
        return matmul(g, a, true, true);
      }
    }
    case Op::kAdd:
      return g;
    case Op::kMul:
      return mul(g, pi == 0 ? b : a);
    case Op::kScale:
      return scale(g, n.factor);
    case Op::kSum:
    case Op::kMean: {
      BroadcastKind k = n.axis == Axis::kAll ? BroadcastKind::kScalar
                        : n.axis == Axis::kBatch ? BroadcastKind::kRowVector
                                                 : BroadcastKind::kColVector;
      NodeId bc = broadcast(g, at(a).shape, k);
      if (n.op == Op::kMean) bc = scale(bc, 1.0 / static_cast<double>(reduced_count(at(a).shape, n.axis)));
      return bc;
    }
    case Op::kSquare:
      return scale(mul(g, a), 2.0);
    case Op::kGelu:
      // gelu'(x) = Phi(x) + x phi(x)
      return mul(g, add(norm_cdf(a), mul(a, norm_pdf(a))));
    case Op::kSilu: {
      // silu'(x) = s + x s - x s^2 with s = sigmoid(x)
      NodeId s = sigmoid(a);
      return mul(g, add(s, sub(mul(a, s), mul(a, square(s)))));
    }
    case Op::kSigmoid:
      // s' = s - s^2; reuse this node's own value
      return mul(g, sub(n.id, square(n.id)));
    case Op::kNormCdf:
      return mul(g, norm_pdf(a));
    case Op::kNormPdf:
      // phi'(x) = -x phi(x); reuse this node's own value
      return mul(g, mul(scale(a, -1.0), n.id));
    case Op::kDot: {
      NodeId other = pi == 0 ? b : a;
      if (at(a).shape.rank() == 2)
        return mul(broadcast(g, at(other).shape, BroadcastKind::kColVector), other);
      return mul(broadcast(g, at(other).shape, BroadcastKind::kScalar), other);
    }
    case Op::kConcat: {
      Index ca = at(a).shape.cols();
      if (pi == 0) return slice_cols(g, 0, ca);
      return slice_cols(g, ca, n.shape.cols());
    }
    case Op::kSlice:
      return pad_cols(g, at(a).shape.cols(), n.begin);
    case Op::kPad:
      return slice_cols(g, n.begin, n.begin + at(a).shape.cols());
    case Op::kBroadcast:
      switch (n.bcast) {
        case BroadcastKind::kScalar: return sum(g, Axis::kAll);
        case BroadcastKind::kRowVector: return sum(g, Axis::kBatch);
        case BroadcastKind::kColVector: return sum(g, Axis::kCols);
      }
  }
  throw GraphError("unhandled op in parent_adjoint");
}

std::vector<NodeId> Graph::grad(NodeId scalar, std::span<const NodeId> wrt) {
  if (at(scalar).shape.rank() != 0)
    throw GraphError("grad: node " + std::to_string(scalar.v) + " is not scalar-shaped");
  for (NodeId w : wrt) {
    if (at(w).op != Op::kInput) throw GraphError("grad: wrt node " + std::to_string(w.v) + " is not an input");
  }

  // Ancestors of the scalar, found by sparse traversal. Every ancestor's
  // parents are themselves ancestors, so the wrt-reachability pass below can
  // stay inside this set.
  anc_mark_.resize(nodes_.size(), 0);
  wrt_mark_.resize(nodes_.size(), 0);
  const std::uint64_t epoch = ++epoch_;
  auto anc_seen = [&](std::int32_t i) { return anc_mark_[static_cast<size_t>(i)] == epoch; };
  auto from_wrt = [&](std::int32_t i) { return wrt_mark_[static_cast<size_t>(i)] == epoch; };

  std::vector<std::int32_t> ancestors;
  {
    std::vector<std::int32_t> stack{scalar.v};
    anc_mark_[static_cast<size_t>(scalar.v)] = epoch;
    while (!stack.empty()) {
      std::int32_t id = stack.back();
      stack.pop_back();
      ancestors.push_back(id);
      for (NodeId p : nodes_[static_cast<size_t>(id)].parents) {
        if (!anc_seen(p.v)) {
          anc_mark_[static_cast<size_t>(p.v)] = epoch;
          stack.push_back(p.v);
        }
      }
    }
  }
  std::sort(ancestors.begin(), ancestors.end());

  // which ancestors descend from a wrt node
  for (NodeId w : wrt)
    if (anc_seen(w.v)) wrt_mark_[static_cast<size_t>(w.v)] = epoch;
  for (std::int32_t id : ancestors) {
    if (from_wrt(id)) continue;
    for (NodeId p : nodes_[static_cast<size_t>(id)].parents)
      if (from_wrt(p.v)) {
        wrt_mark_[static_cast<size_t>(id)] = epoch;
        break;
      }
  }

  std::unordered_map<std::int32_t, NodeId> adjoint;
  if (from_wrt(scalar.v)) adjoint.emplace(scalar.v, constant(Tensor::scalar(1.0)));

  for (auto it = ancestors.rbegin(); it != ancestors.rend(); ++it) {
    const std::int32_t i = *it;
    if (!from_wrt(i)) continue;
    auto found = adjoint.find(i);
    if (found == adjoint.end()) continue;
    const NodeId g = found->second;
    const Node snapshot = nodes_[static_cast<size_t>(i)];  // appends below may reallocate nodes_
    for (std::size_t pi = 0; pi < snapshot.parents.size(); ++pi) {
      NodeId p = snapshot.parents[pi];
      if (!from_wrt(p.v)) continue;
      NodeId contrib = parent_adjoint(snapshot, pi, g);
      auto [slot, fresh] = adjoint.try_emplace(p.v, contrib);
      if (!fresh) slot->second = add(slot->second, contrib);
    }
  }

  std::vector<NodeId> out;
  out.reserve(wrt.size());
  for (NodeId w : wrt) {
    auto found = adjoint.find(w.v);
    if (found != adjoint.end())
      out.push_back(found->second);
    else
      out.push_back(constant(Tensor::zeros(at(w).shape)));
  }
  return out;
}

bool Graph::depends_on(NodeId out, NodeId in) const {
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<NodeId> stack{out};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (id == in) return true;
    if (seen[id.v]) continue;
    seen[id.v] = 1;
    for (NodeId p : at(id).parents) stack.push_back(p);
  }
  return false;
}

// ---------------------------------------------------------------------------

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: h must be positive");
  Tensor g = Tensor::zeros(x.shape());
  Tensor probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    double up = f(probe);
    probe[i] = x[i] - h;
    double dn = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(dn)) throw GraphError("finite_diff: non-finite function value");
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

}  // namespace dcd
