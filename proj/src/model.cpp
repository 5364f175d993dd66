#include "dcd/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>

#include "dcd/rng.hpp"

namespace dcd {

Index MlpEbm::param_count() const {
  Index n = 0;
  for (size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
  return n;
}

MlpEbm init_params(std::vector<Index> dims, std::uint64_t seed, Activation activation) {
  if (dims.size() < 2 || dims.back() != 1) throw std::invalid_argument("init_params: dims must end in 1");
  MlpEbm m;
  m.dims = std::move(dims);
  m.activation = activation;
  m.seed = seed;
  Rng rng(seed);
  for (size_t l = 0; l + 1 < m.dims.size(); ++l) {
    const Index fan_in = m.dims[l], fan_out = m.dims[l + 1];
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    m.params.push_back(rand_uniform(rng, Shape{fan_in, fan_out}, -bound, bound));
    m.params.push_back(Tensor::zeros(Shape{fan_out}));
  }
  return m;
}

QuadraticEbm QuadraticEbm::isotropic_gaussian(Index d, double sigma2) {
  QuadraticEbm q;
  q.mu = Tensor::zeros(Shape{d});
  q.coeff = Tensor::full(Shape{d}, -1.0 / sigma2);
  return q;
}

QuadraticEbm QuadraticEbm::centered(Tensor mu, double sigma2) {
  QuadraticEbm q;
  q.coeff = Tensor::full(mu.shape(), -1.0 / sigma2);
  q.mu = std::move(mu);
  return q;
}

TimeEbm init_time_ebm(Index data_dim, std::vector<Index> hidden, std::uint64_t seed, double t_max,
                      TimeFeature feature, Index feature_dim, Activation activation) {
  TimeEbm t;
  t.data_dim = data_dim;
  t.t_max = t_max;
  t.feature = feature;
  t.feature_dim = feature == TimeFeature::kScalarT ? 1 : feature_dim;
  if (t.feature == TimeFeature::kSinusoidal && (feature_dim < 2 || feature_dim % 2 != 0))
    throw std::invalid_argument("init_time_ebm: sinusoidal feature_dim must be even and >= 2");
  std::vector<Index> dims;
  dims.push_back(data_dim + t.feature_dim);
  for (Index h : hidden) dims.push_back(h);
  dims.push_back(1);
  t.net = init_params(std::move(dims), seed, activation);
  return t;
}

Tensor time_features(const TimeEbm& m, double t) {
  if (m.feature == TimeFeature::kScalarT) {
    Tensor f = Tensor::zeros(Shape{1});
    f[0] = t;
    return f;
  }
  Tensor f = Tensor::zeros(Shape{m.feature_dim});
  for (Index j = 0; j < m.feature_dim / 2; ++j) {
    const double omega = M_PI * std::pow(2.0, static_cast<double>(j)) / m.t_max;
    f[2 * j] = std::sin(omega * t);
    f[2 * j + 1] = std::cos(omega * t);
  }
  return f;
}

std::vector<NodeId> declare_params(Graph& g, const MlpEbm& m) {
  std::vector<NodeId> ids;
  ids.reserve(m.params.size());
  for (const Tensor& p : m.params) ids.push_back(g.input(p.shape()));
  return ids;
}

std::vector<NodeId> declare_params(Graph&, const QuadraticEbm&) { return {}; }

std::vector<NodeId> declare_params(Graph& g, const TimeEbm& m) { return declare_params(g, m.net); }

std::vector<NodeId> declare_params(Graph& g, const TimeSlice& m) { return declare_params(g, m.model->net); }

Bindings param_bindings(const MlpEbm& m, std::span<const NodeId> ids) {
  if (ids.size() != m.params.size()) throw GraphError("param_bindings: id count mismatch");
  Bindings b;
  for (size_t i = 0; i < ids.size(); ++i) b.emplace(ids[i].v, m.params[i]);
  return b;
}

Bindings param_bindings(const QuadraticEbm&, std::span<const NodeId>) { return {}; }

Bindings param_bindings(const TimeEbm& m, std::span<const NodeId> ids) { return param_bindings(m.net, ids); }

Bindings param_bindings(const TimeSlice& m, std::span<const NodeId> ids) {
  return param_bindings(m.model->net, ids);
}

NodeId energy_node(Graph& g, const MlpEbm& m, std::span<const NodeId> params, NodeId x) {
  if (g.node(x).shape.rank() != 2 || g.node(x).shape.cols() != m.dims.front())
    throw GraphError("energy: input shape " + g.node(x).shape.str() + " does not match model dim " +
                     std::to_string(m.dims.front()));
  if (params.size() != m.params.size()) throw GraphError("energy: wrong parameter count");
  NodeId h = x;
  const Index layers = m.n_layers();
  for (Index l = 0; l < layers; ++l) {
    h = g.affine(h, params[2 * l], params[2 * l + 1]);
    if (l + 1 < layers) h = m.activation == Activation::kGelu ? g.gelu(h) : g.silu(h);
  }
  return g.sum(h, Axis::kCols);  // (B,1) -> (B,)
}

NodeId energy_node(Graph& g, const QuadraticEbm& m, std::span<const NodeId>, NodeId x) {
  const Shape s = g.node(x).shape;  // copy: appends below reallocate node storage
  if (s.rank() != 2 || s.cols() != m.dim()) throw GraphError("energy: bad input shape for quadratic model");
  NodeId neg_mu = g.constant([&] {
    Tensor t = m.mu;
    t.flat() *= -1.0;
    return t;
  }());
  NodeId centered = g.add(x, g.broadcast(neg_mu, s, BroadcastKind::kRowVector));
  NodeId half_coeff = g.constant([&] {
    Tensor t = m.coeff;
    t.flat() *= 0.5;
    return t;
  }());
  NodeId weighted = g.mul(g.square(centered), g.broadcast(half_coeff, s, BroadcastKind::kRowVector));
  return g.sum(weighted, Axis::kCols);
}

NodeId energy_node(Graph& g, const TimeSlice& m, std::span<const NodeId> params, NodeId x) {
  return energy_node_at(g, *m.model, params, x, m.t);
}

NodeId energy_node_at(Graph& g, const TimeEbm& m, std::span<const NodeId> params, NodeId x, double t) {
  const Shape s = g.node(x).shape;
  if (s.rank() != 2 || s.cols() != m.data_dim) throw GraphError("energy: bad input shape for time model");
  Tensor feat_row = time_features(m, t);
  Tensor feat = Tensor::zeros(Shape{s.rows(), m.feature_dim});
  feat.mat().rowwise() = feat_row.vec().transpose();
  NodeId xt = g.concat(x, g.constant(std::move(feat)));
  return energy_node(g, m.net, params, xt);
}

NodeId score_node(Graph& g, NodeId energy, NodeId x) { return g.grad1(g.sum(energy, Axis::kAll), x); }

NodeId laplacian_exact_node(Graph& g, NodeId score, NodeId x) {
  const Index d = g.node(x).shape.cols();
  if (d > kMaxExactLaplacianDim)
    throw GraphError("laplacian_exact: dimension " + std::to_string(d) + " exceeds " +
                     std::to_string(kMaxExactLaplacianDim));
  NodeId lap{};
  for (Index j = 0; j < d; ++j) {
    NodeId sj = g.sum(g.slice_cols(score, j, j + 1), Axis::kAll);
    NodeId hcol = g.grad1(sj, x);                                 // (B,D): rows hold d s_j / d x
    NodeId hjj = g.sum(g.slice_cols(hcol, j, j + 1), Axis::kCols);  // (B,)
    lap = lap.valid() ? g.add(lap, hjj) : hjj;
  }
  return lap;
}

NodeId hutchinson_laplacian_node(Graph& g, NodeId score, NodeId x, std::span<const Tensor> probes) {
  if (probes.empty()) throw GraphError("hutchinson: need at least one probe");
  NodeId acc{};
  for (const Tensor& v : probes) {
    NodeId vc = g.constant(v);
    NodeId sv = g.sum(g.dot(score, vc), Axis::kAll);
    NodeId hv = g.grad1(sv, x);          // (B,D): per-row H v
    NodeId quad = g.dot(hv, vc);         // (B,): v^T H v
    acc = acc.valid() ? g.add(acc, quad) : quad;
  }
  return g.scale(acc, 1.0 / static_cast<double>(probes.size()));
}

// --- checkpoints -------------------------------------------------------------

namespace {

void write_params(std::ofstream& out, const MlpEbm& m) {
  out << "dims";
  for (Index d : m.dims) out << ' ' << d;
  out << '\n';
  out << "activation " << (m.activation == Activation::kGelu ? "gelu" : "silu") << '\n';
  out << "seed " << m.seed << '\n';
  Index count = 0;
  for (const Tensor& p : m.params) count += p.size();
  out << "values " << count << '\n';
  for (const Tensor& p : m.params)
    out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
}

MlpEbm read_params(std::ifstream& in) {
  MlpEbm m;
  std::string key;
  in >> key;
  if (key != "dims") throw std::runtime_error("checkpoint: expected dims");
  {
    std::string rest;
    std::getline(in, rest);
    size_t pos = 0;
    while (pos < rest.size()) {
      size_t next = 0;
      long v = std::stol(rest.substr(pos), &next);
      m.dims.push_back(v);
      pos += next;
      while (pos < rest.size() && rest[pos] == ' ') ++pos;
    }
  }
  std::string act;
  in >> key >> act;
  if (key != "activation") throw std::runtime_error("checkpoint: expected activation");
  m.activation = act == "silu" ? Activation::kSilu : Activation::kGelu;
  in >> key >> m.seed;
  if (key != "seed") throw std::runtime_error("checkpoint: expected seed");
  Index count = 0;
  in >> key >> count;
  if (key != "values") throw std::runtime_error("checkpoint: expected values");
  in.get();  // newline before the raw block
  Index expected = 0;
  for (size_t l = 0; l + 1 < m.dims.size(); ++l) {
    m.params.push_back(Tensor::zeros(Shape{m.dims[l], m.dims[l + 1]}));
    m.params.push_back(Tensor::zeros(Shape{m.dims[l + 1]}));
    expected += m.dims[l] * m.dims[l + 1] + m.dims[l + 1];
  }
  if (expected != count) throw std::runtime_error("checkpoint: value count does not match dims");
  for (Tensor& p : m.params) {
    in.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated parameter block");
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const MlpEbm& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "DCD-EBM 1\n";
  out << "kind mlp\n";
  write_params(out, m);
}

void save_checkpoint(const std::string& path, const TimeEbm& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "DCD-EBM 1\n";
  out << "kind time " << m.data_dim << ' '
      << (m.feature == TimeFeature::kScalarT ? "scalar" : "sinusoidal") << ' ' << m.feature_dim << ' '
      << std::setprecision(17) << m.t_max << '\n';
  write_params(out, m.net);
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "DCD-EBM" || version != "1") throw std::runtime_error("checkpoint: bad magic in " + path);
  std::string key, kind;
  in >> key >> kind;
  if (key != "kind") throw std::runtime_error("checkpoint: expected kind");
  LoadedModel out;
  if (kind == "mlp") {
    out.mlp = read_params(in);
  } else if (kind == "time") {
    out.is_time = true;
    std::string feature;
    in >> out.time.data_dim >> feature >> out.time.feature_dim >> out.time.t_max;
    out.time.feature = feature == "sinusoidal" ? TimeFeature::kSinusoidal : TimeFeature::kScalarT;
    out.time.net = read_params(in);
  } else {
    throw std::runtime_error("checkpoint: unknown kind " + kind);
  }
  return out;
}

}  // namespace dcd
