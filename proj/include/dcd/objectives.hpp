#pragma once

#include <map>
#include <string>
#include <vector>

#include "dcd/diffusion.hpp"
#include "dcd/model.hpp"
#include "dcd/sampler.hpp"

namespace dcd {

/// A scalar training/evaluation objective together with the graph that
/// produced it, so callers can take parameter gradients of the same node.
/// Construction only builds nodes; evaluate() (or evaluate_with_grads(), one
/// shared forward pass) fills in the numbers.
struct LossGraph {
  Graph graph;
  NodeId loss;
  std::vector<NodeId> params;
  Bindings bindings;
  std::vector<std::pair<std::string, NodeId>> component_nodes;
  double value = 0.0;
  std::map<std::string, double> components;
  Index score_evals = 0;  // budget bookkeeping per loss construction

  LossGraph& evaluate() {
    eval_outputs({});
    return *this;
  }

  /// Evaluates loss, components and d(loss)/d(params) in one pass.
  std::vector<Tensor> evaluate_with_grads() {
    return eval_outputs(graph.grad(loss, params));
  }

 private:
  std::vector<Tensor> eval_outputs(std::vector<NodeId> grads) {
    std::vector<NodeId> outs{loss};
    for (const auto& [name, id] : component_nodes) outs.push_back(id);
    outs.insert(outs.end(), grads.begin(), grads.end());
    auto vals = graph.eval(std::span<const NodeId>(outs.data(), outs.size()), bindings);
    value = vals[0].value();
    for (size_t i = 0; i < component_nodes.size(); ++i)
      components[component_nodes[i].first] = vals[1 + i].value();
    return {vals.begin() + 1 + static_cast<std::ptrdiff_t>(component_nodes.size()), vals.end()};
  }
};

namespace detail {

inline NodeId make_laplacian(Graph& g, NodeId score, NodeId x, const LaplacianSpec& spec, Rng& rng) {
  if (spec.mode == LaplacianMode::kExact) return laplacian_exact_node(g, score, x);
  std::vector<Tensor> probes;
  probes.reserve(static_cast<size_t>(spec.n_probes));
  const Shape xs = g.node(x).shape;
  for (int i = 0; i < spec.n_probes; ++i)
    probes.push_back(spec.gaussian_probes ? randn(rng, xs) : rademacher(rng, xs));
  return hutchinson_laplacian_node(g, score, x, probes);
}

}  // namespace detail

/// One-step DCD-VE objective:
///   E_{p_t} 1/2 G^2(0) [ |grad f|^2 + Lap f ] + (1/t)( E_{p_t} f(x_t) - E_{p_d} f(x_0) ),
/// with x_t the perturbation of the same x_0 rows (common random numbers).
template <class Model>
LossGraph dcd_ve_loss(const Model& m, const Tensor& x0, double t, const VeSchedule& sched,
                      const LaplacianSpec& lap, Rng& rng) {
  if (!(t > 0.0)) throw std::invalid_argument("dcd_ve_loss: t must be positive");
  Tensor xt = perturb(x0, t, sched, rng);

  LossGraph L;
  Graph& g = L.graph;
  L.params = declare_params(g, m);
  NodeId xt_in = g.input(xt.shape());
  NodeId e_t = energy_node(g, m, L.params, xt_in);
  NodeId s = score_node(g, e_t, xt_in);
  NodeId lap_node = detail::make_laplacian(g, s, xt_in, lap, rng);
  NodeId rate = g.scale(g.add(g.dot(s, s), lap_node), 0.5 * sched.g_sq(0.0));
  NodeId term1 = g.mean(rate, Axis::kAll);

  NodeId e_0 = energy_node(g, m, L.params, g.constant(x0));
  NodeId term2 = g.scale(g.sub(g.mean(e_t, Axis::kAll), g.mean(e_0, Axis::kAll)), 1.0 / t);

  L.loss = g.add(term1, term2);
  L.bindings = param_bindings(m, L.params);
  L.bindings.emplace(xt_in.v, std::move(xt));
  L.score_evals = 1 + lap.evals(x0.cols());
  L.component_nodes = {{"term1", term1}, {"term2", term2}};
  return L;
}

/// mean f(negatives) - mean f(positives) with both sample sets frozen: the
/// simplified CD objective given its stop-gradient samples.
template <class Model>
LossGraph energy_gap_loss(const Model& m, const Tensor& negatives, const Tensor& positives) {
  LossGraph L;
  Graph& g = L.graph;
  L.params = declare_params(g, m);
  NodeId e_neg = g.mean(energy_node(g, m, L.params, g.constant(negatives)), Axis::kAll);
  NodeId e_pos = g.mean(energy_node(g, m, L.params, g.constant(positives)), Axis::kAll);
  L.loss = g.sub(e_neg, e_pos);
  L.bindings = param_bindings(m, L.params);
  L.component_nodes = {{"energy_neg", e_neg}, {"energy_pos", e_pos}};
  return L;
}

/// Simplified contrastive divergence with data-initialized short-run chains;
/// negatives are detached samples.
template <class Model>
LossGraph cd_loss(const Model& m, const Tensor& x0, const LangevinConfig& cfg, Rng& rng) {
  Tensor neg = langevin_run(m, x0, cfg, rng);  // ChainDivergedError propagates to the caller
  LossGraph L = energy_gap_loss(m, neg, x0);
  L.score_evals = cfg.n_steps;
  return L;
}

/// CD with persistent chains from a replay buffer (updated in place).
template <class Model>
LossGraph pcd_loss(const Model& m, const Tensor& x0, ReplayBuffer& buffer, const LangevinConfig& cfg,
                   Rng& rng) {
  Tensor neg = pcd_negatives(m, buffer, x0.rows(), cfg, rng);
  LossGraph L = energy_gap_loss(m, neg, x0);
  L.score_evals = cfg.n_steps;
  return L;
}

/// Score-matching evaluation metric E[ 1/2 |grad f|^2 + Lap f ].
template <class Model>
LossGraph sm_eval_loss(const Model& m, const Tensor& x, const LaplacianSpec& lap, Rng& rng) {
  LossGraph L;
  Graph& g = L.graph;
  L.params = declare_params(g, m);
  NodeId xin = g.input(x.shape());
  NodeId s = score_node(g, energy_node(g, m, L.params, xin), xin);
  NodeId lap_node = detail::make_laplacian(g, s, xin, lap, rng);
  NodeId half_norm = g.mean(g.scale(g.dot(s, s), 0.5), Axis::kAll);
  NodeId mean_lap = g.mean(lap_node, Axis::kAll);
  L.loss = g.add(half_norm, mean_lap);
  L.bindings = param_bindings(m, L.params);
  L.bindings.emplace(xin.v, x);
  L.score_evals = 1 + lap.evals(x.cols());
  L.component_nodes = {{"half_score_norm", half_norm}, {"laplacian", mean_lap}};
  return L;
}

enum class ProbeDist : std::uint8_t { kRademacher, kGaussian };

/// Stochastic trace estimate of the Laplacian, v^T (d score / dx) v averaged
/// over probes; per-row output.
template <class Model>
Tensor hutchinson_laplacian(const Model& m, const Tensor& x, int n_probes, ProbeDist dist, Rng& rng) {
  if (n_probes < 1) throw std::invalid_argument("hutchinson_laplacian: n_probes must be >= 1");
  LaplacianSpec spec;
  spec.mode = LaplacianMode::kHutchinson;
  spec.n_probes = n_probes;
  spec.gaussian_probes = dist == ProbeDist::kGaussian;
  Graph g;
  auto ids = declare_params(g, m);
  NodeId xin = g.input(x.shape());
  NodeId s = score_node(g, energy_node(g, m, ids, xin), xin);
  NodeId lap = detail::make_laplacian(g, s, xin, spec, rng);
  Bindings b = param_bindings(m, ids);
  b.emplace(xin.v, x);
  return g.eval(lap, b);
}

/// Discretization of the diffusion into noise levels, geometric in sigma.
struct TimeGrid {
  std::vector<double> times;  // ascending, in (0, t_max]

  static TimeGrid geometric_sigma(const VeSchedule& sched, double sigma_min, double sigma_max, int k);
  int levels() const { return static_cast<int>(times.size()); }
};

/// Time-dependent DCD (one uniformly drawn level per call): the slice
/// f(., t_i) sees data diffused to t_{i-1} and its small perturbation to t_i,
/// with delta_i = t_i - t_{i-1} and G^2 evaluated at t_i.
LossGraph dcd_ve_time_loss(const TimeEbm& m, const Tensor& x0, const VeSchedule& sched, const TimeGrid& grid,
                           const LaplacianSpec& lap, Rng& rng);

}  // namespace dcd
