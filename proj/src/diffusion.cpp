#include "dcd/diffusion.hpp"

#include <cmath>

namespace dcd {

VeSchedule VeSchedule::constant(double g0, double t_max) {
  VeSchedule s;
  s.kind = Kind::kConst;
  s.g0 = g0;
  s.t_max = t_max;
  return s;
}

VeSchedule VeSchedule::linear(double t_max) {
  VeSchedule s;
  s.kind = Kind::kLinear;
  s.t_max = t_max;
  return s;
}

double sigma2(const VeSchedule& sched, double t) {
  if (t < 0.0 || t > sched.t_max)
    throw std::invalid_argument("sigma2: t=" + std::to_string(t) + " outside [0, " +
                                std::to_string(sched.t_max) + "]");
  return sched.kind == VeSchedule::Kind::kConst ? sched.g0 * sched.g0 * t : t * t * t / 3.0;
}

Tensor perturb(const Tensor& x0, double t, const VeSchedule& sched, Rng& rng) {
  const double var = sigma2(sched, t);
  if (var == 0.0) return x0;
  Tensor out = randn(rng, x0.shape());
  out.flat() = x0.flat() + std::sqrt(var) * out.flat();
  return out;
}

}  // namespace dcd
