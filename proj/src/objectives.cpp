#include "dcd/objectives.hpp"

#include <cmath>

namespace dcd {

namespace {

double time_of_sigma(const VeSchedule& sched, double sigma) {
  const double s2 = sigma * sigma;
  return sched.kind == VeSchedule::Kind::kConst ? s2 / (sched.g0 * sched.g0) : std::cbrt(3.0 * s2);
}

}  // namespace

TimeGrid TimeGrid::geometric_sigma(const VeSchedule& sched, double sigma_min, double sigma_max, int k) {
  if (k < 1) throw std::invalid_argument("TimeGrid: need at least one level");
  if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min))
    throw std::invalid_argument("TimeGrid: need 0 < sigma_min <= sigma_max");
  TimeGrid grid;
  grid.times.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    double sigma = k == 1 ? sigma_max
                          : sigma_min * std::pow(sigma_max / sigma_min,
                                                 static_cast<double>(i) / static_cast<double>(k - 1));
    double t = time_of_sigma(sched, sigma);
    if (t > sched.t_max)
      throw std::invalid_argument("TimeGrid: level " + std::to_string(t) + " exceeds t_max " +
                                  std::to_string(sched.t_max));
    grid.times.push_back(t);
  }
  return grid;
}

LossGraph dcd_ve_time_loss(const TimeEbm& m, const Tensor& x0, const VeSchedule& sched, const TimeGrid& grid,
                           const LaplacianSpec& lap, Rng& rng) {
  if (grid.times.empty()) throw std::invalid_argument("dcd_ve_time_loss: empty grid");
  int level = 0;
  if (grid.levels() > 1) {
    std::uniform_int_distribution<int> pick(0, grid.levels() - 1);
    level = pick(rng);
  }
  const double t_hi = grid.times[static_cast<size_t>(level)];
  const double t_lo = level > 0 ? grid.times[static_cast<size_t>(level - 1)] : 0.0;
  const double delta = t_hi - t_lo;
  if (!(delta > 0.0)) throw std::invalid_argument("dcd_ve_time_loss: grid times must be strictly increasing");

  // data at the level's base time, then the small incremental perturbation
  Tensor x_base = perturb(x0, t_lo, sched, rng);
  const double dvar = sigma2(sched, t_hi) - sigma2(sched, t_lo);
  Tensor x_pert = randn(rng, x0.shape());
  x_pert.flat() = x_base.flat() + std::sqrt(dvar) * x_pert.flat();

  LossGraph L;
  Graph& g = L.graph;
  L.params = declare_params(g, m);
  NodeId xp_in = g.input(x_pert.shape());
  NodeId e_pert = energy_node_at(g, m, L.params, xp_in, t_hi);
  NodeId s = score_node(g, e_pert, xp_in);
  NodeId lap_node = detail::make_laplacian(g, s, xp_in, lap, rng);
  NodeId rate = g.scale(g.add(g.dot(s, s), lap_node), 0.5 * sched.g_sq(t_hi));
  NodeId term1 = g.mean(rate, Axis::kAll);

  NodeId e_base = energy_node_at(g, m, L.params, g.constant(std::move(x_base)), t_hi);
  NodeId term2 = g.scale(g.sub(g.mean(e_pert, Axis::kAll), g.mean(e_base, Axis::kAll)), 1.0 / delta);

  L.loss = g.add(term1, term2);
  L.bindings = param_bindings(m, L.params);
  L.bindings.emplace(xp_in.v, std::move(x_pert));
  L.score_evals = 1 + lap.evals(x0.cols());
  L.component_nodes = {{"term1", term1}, {"term2", term2}};
  L.components["t_level"] = t_hi;
  L.components["delta"] = delta;
  return L;
}

}  // namespace dcd
