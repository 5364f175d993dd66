#pragma once

#include <functional>
#include <vector>

#include "dcd/diffusion.hpp"
#include "dcd/objectives.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

/// Isotropic Gaussian N(mean, variance I); under VE diffusion it stays
/// Gaussian with variance + Sigma(t), which is what makes the closed-form
/// oracle routes possible.
struct GaussianSpec {
  Tensor mean;
  double variance = 1.0;

  static GaussianSpec standard(Index d);
  static GaussianSpec make(Tensor mean, double variance);
  Index dim() const { return mean.size(); }
};

/// Closed-form KL of two isotropic Gaussians.
double gaussian_kl(const GaussianSpec& p, const GaussianSpec& q);

/// KL between the time-t VE evolutions of p and q.
double gaussian_kl_ve(const GaussianSpec& p, const GaussianSpec& q, const VeSchedule& sched, double t);

/// Closed-form score-gap integrand 1/2 G^2(t) E_{p_t} |grad log p_t - grad log q_t|^2.
double score_gap_integrand(const GaussianSpec& p, const GaussianSpec& q, const VeSchedule& sched, double t);

struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DcdResult {
  double kl_difference = 0.0;  // KL(p,q) - KL(p_T, q_T)
  double quadrature = 0.0;     // time integral of the score-gap integrand
};

/// Both routes of the divergence identity; Simpson panels are doubled for a
/// convergence check and disagreement raises QuadratureError.
DcdResult dcd_gaussian(const GaussianSpec& p, const GaussianSpec& q, const VeSchedule& sched, double t_end,
                       int panels = 1024);

struct MonotoneReport {
  std::vector<double> kl_values;
  double max_violation = 0.0;  // largest increase between consecutive grid points
};

/// Verifies KL(p_t, q_t) is non-increasing along the grid.
MonotoneReport kl_monotone_check(const GaussianSpec& p, const GaussianSpec& q, const VeSchedule& sched,
                                 const std::vector<double>& time_grid);

/// Central finite differences over randomly probed parameters against the
/// autodiff gradient of the same loss; returns max |ad-fd| / (1+|fd|).
/// The constructor must be deterministic (fix its rng seeds) so the +h/-h
/// evaluations share every random draw.
double grad_check(const std::function<LossGraph(const MlpEbm&)>& make_loss, const MlpEbm& model,
                  int n_params, double h, Rng& rng);

}  // namespace dcd
