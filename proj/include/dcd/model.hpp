#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcd/graph.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

enum class Activation : std::uint8_t { kGelu, kSilu };

/// Scalar energy MLP: affine layers with GELU (or SiLU) between them, one
/// output unit. Value object; training produces new parameter sets.
struct MlpEbm {
  std::vector<Index> dims;      // e.g. {2, 300, 300, 300, 1}
  Activation activation = Activation::kGelu;
  std::uint64_t seed = 0;
  std::vector<Tensor> params;   // W0, b0, W1, b1, ...

  Index dim() const { return dims.front(); }
  Index n_layers() const { return static_cast<Index>(dims.size()) - 1; }
  Index param_count() const;
};

/// Weights uniform on (-sqrt(1/fan_in), +sqrt(1/fan_in)), biases zero.
MlpEbm init_params(std::vector<Index> dims, std::uint64_t seed, Activation activation = Activation::kGelu);

/// Closed-form energy f(x) = 1/2 sum_j coeff_j (x_j - mu_j)^2, the analytic
/// stand-in used by oracle tests. coeff = -1/sigma^2 gives an isotropic
/// Gaussian energy.
struct QuadraticEbm {
  Tensor mu;     // (D,)
  Tensor coeff;  // (D,)

  static QuadraticEbm isotropic_gaussian(Index d, double sigma2 = 1.0);
  static QuadraticEbm centered(Tensor mu, double sigma2 = 1.0);
  Index dim() const { return mu.size(); }
};

enum class TimeFeature : std::uint8_t { kScalarT, kSinusoidal };

/// Energy over [x, tau(t)]; the network input dimension is D + feature_dim.
struct TimeEbm {
  MlpEbm net;
  Index data_dim = 0;
  double t_max = 1.0;
  TimeFeature feature = TimeFeature::kScalarT;
  Index feature_dim = 1;

  Index dim() const { return data_dim; }
};

TimeEbm init_time_ebm(Index data_dim, std::vector<Index> hidden, std::uint64_t seed, double t_max,
                      TimeFeature feature = TimeFeature::kScalarT, Index feature_dim = 1,
                      Activation activation = Activation::kGelu);

/// Time feature row for a given t (length feature_dim).
Tensor time_features(const TimeEbm& m, double t);

/// Fixed-t view of a TimeEbm, usable wherever a plain energy model is.
struct TimeSlice {
  const TimeEbm* model = nullptr;
  double t = 0.0;
  Index dim() const { return model->data_dim; }
};

// --- graph builders --------------------------------------------------------

std::vector<NodeId> declare_params(Graph& g, const MlpEbm& m);
std::vector<NodeId> declare_params(Graph& g, const QuadraticEbm& m);
std::vector<NodeId> declare_params(Graph& g, const TimeEbm& m);
std::vector<NodeId> declare_params(Graph& g, const TimeSlice& m);

Bindings param_bindings(const MlpEbm& m, std::span<const NodeId> ids);
Bindings param_bindings(const QuadraticEbm& m, std::span<const NodeId> ids);
Bindings param_bindings(const TimeEbm& m, std::span<const NodeId> ids);
Bindings param_bindings(const TimeSlice& m, std::span<const NodeId> ids);

/// Per-row energy, shape (B,).
NodeId energy_node(Graph& g, const MlpEbm& m, std::span<const NodeId> params, NodeId x);
NodeId energy_node(Graph& g, const QuadraticEbm& m, std::span<const NodeId> params, NodeId x);
NodeId energy_node(Graph& g, const TimeSlice& m, std::span<const NodeId> params, NodeId x);
/// Energy of the slice f(., t); t enters as a constant feature column.
NodeId energy_node_at(Graph& g, const TimeEbm& m, std::span<const NodeId> params, NodeId x, double t);

/// d(sum of energies)/dx: per-row score, shape (B,D). `x` must be an input node.
NodeId score_node(Graph& g, NodeId energy, NodeId x);
/// Exact Laplacian via one directional second derivative per coordinate, (B,).
NodeId laplacian_exact_node(Graph& g, NodeId score, NodeId x);
/// Hutchinson estimate of the Laplacian from given probe tensors, (B,).
NodeId hutchinson_laplacian_node(Graph& g, NodeId score, NodeId x, std::span<const Tensor> probes);

inline constexpr Index kMaxExactLaplacianDim = 16;

// --- convenience evaluation (fresh graph per call) ---------------------------

template <class Model>
Tensor energy(const Model& m, const Tensor& x) {
  Graph g;
  auto ids = declare_params(g, m);
  NodeId xin = g.constant(x);
  NodeId e = energy_node(g, m, ids, xin);
  return g.eval(e, param_bindings(m, ids));
}

template <class Model>
Tensor score(const Model& m, const Tensor& x) {
  Graph g;
  auto ids = declare_params(g, m);
  NodeId xin = g.input(x.shape());
  NodeId s = score_node(g, energy_node(g, m, ids, xin), xin);
  Bindings b = param_bindings(m, ids);
  b.emplace(xin.v, x);
  return g.eval(s, b);
}

template <class Model>
Tensor laplacian_exact(const Model& m, const Tensor& x) {
  if (x.cols() > kMaxExactLaplacianDim)
    throw GraphError("laplacian_exact: dimension exceeds " + std::to_string(kMaxExactLaplacianDim) +
                     ", use the Hutchinson estimator");
  Graph g;
  auto ids = declare_params(g, m);
  NodeId xin = g.input(x.shape());
  NodeId s = score_node(g, energy_node(g, m, ids, xin), xin);
  NodeId lap = laplacian_exact_node(g, s, xin);
  Bindings b = param_bindings(m, ids);
  b.emplace(xin.v, x);
  return g.eval(lap, b);
}

// --- checkpoints -------------------------------------------------------------

void save_checkpoint(const std::string& path, const MlpEbm& m);
void save_checkpoint(const std::string& path, const TimeEbm& m);

struct LoadedModel {
  bool is_time = false;
  MlpEbm mlp;
  TimeEbm time;
};
LoadedModel load_checkpoint(const std::string& path);

}  // namespace dcd
