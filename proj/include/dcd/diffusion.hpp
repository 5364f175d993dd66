#pragma once

#include <span>
#include <stdexcept>
#include <string>

#include "dcd/model.hpp"
#include "dcd/rng.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

/// Variance-exploding forward diffusion dx = g(t) dw. Only the two schedules
/// the experiments use are representable: constant g and g(t) = t.
struct VeSchedule {
  enum class Kind : std::uint8_t { kConst, kLinear };

  Kind kind = Kind::kConst;
  double g0 = 1.0;      // kConst only
  double t_max = 1.0;

  static VeSchedule constant(double g0, double t_max = 1.0);
  static VeSchedule linear(double t_max);

  double g(double t) const { return kind == Kind::kConst ? g0 : t; }
  double g_sq(double t) const {
    double v = g(t);
    return v * v;
  }
};

/// Accumulated variance Sigma(t) = int_0^t g(s)^2 ds of the perturbation
/// kernel p(x_t | x_0) = N(x_0, Sigma(t) I).
double sigma2(const VeSchedule& sched, double t);

/// Draws x_0 + sqrt(Sigma(t)) eps; t = 0 returns x_0 unchanged.
Tensor perturb(const Tensor& x0, double t, const VeSchedule& sched, Rng& rng);

enum class LaplacianMode : std::uint8_t { kExact, kHutchinson };

struct LaplacianSpec {
  LaplacianMode mode = LaplacianMode::kExact;
  int n_probes = 1;                       // kHutchinson
  bool gaussian_probes = false;           // default Rademacher
  /// Score-function evaluations this mode charges per loss term (budget
  /// bookkeeping): exact costs one backward pass per coordinate.
  Index evals(Index dim) const { return mode == LaplacianMode::kExact ? dim : n_probes; }
};

/// Appends nodes for 1/2 g(t)^2 (|grad f|^2 + Lap f) per row, shape (B,).
/// Differentiable in the model parameters; `x` must be an input node.
template <class Model>
NodeId energy_evolution_rate_node(Graph& g, const Model& m, std::span<const NodeId> params, NodeId x,
                                  const VeSchedule& sched, double t, const LaplacianSpec& lap, Rng& rng) {
  NodeId e = energy_node(g, m, params, x);
  NodeId s = score_node(g, e, x);
  NodeId lap_node;
  if (lap.mode == LaplacianMode::kExact) {
    lap_node = laplacian_exact_node(g, s, x);
  } else {
    std::vector<Tensor> probes;
    probes.reserve(static_cast<size_t>(lap.n_probes));
    const Shape& xs = g.node(x).shape;
    for (int i = 0; i < lap.n_probes; ++i)
      probes.push_back(lap.gaussian_probes ? randn(rng, xs) : rademacher(rng, xs));
    lap_node = hutchinson_laplacian_node(g, s, x, probes);
  }
  return g.scale(g.add(g.dot(s, s), lap_node), 0.5 * sched.g_sq(t));
}

/// Evaluates the rate on concrete inputs (fresh graph).
template <class Model>
Tensor energy_evolution_rate(const Model& m, const Tensor& x, const VeSchedule& sched, double t,
                             const LaplacianSpec& lap, Rng& rng) {
  Graph g;
  auto ids = declare_params(g, m);
  NodeId xin = g.input(x.shape());
  NodeId rate = energy_evolution_rate_node(g, m, ids, xin, sched, t, lap, rng);
  Bindings b = param_bindings(m, ids);
  b.emplace(xin.v, x);
  return g.eval(rate, b);
}

}  // namespace dcd
