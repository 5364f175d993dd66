#include "dcd/verification.hpp"

#include <cmath>

namespace dcd {

namespace {

PropertyResult upper(std::string name, double value, double tol) {
  return {std::move(name), value, tol, value <= tol};
}

PropertyResult lower(std::string name, double value, double tol) {
  return {std::move(name), value, tol, value >= tol};
}

}  // namespace

std::vector<PropertyResult> verify_theorem1(int n_pairs, Rng& rng) {
  std::vector<PropertyResult> out;
  VeSchedule sched = VeSchedule::constant(1.0, 4.0);

  Tensor zero1 = Tensor::zeros(Shape{1});
  DcdResult frozen = dcd_gaussian(GaussianSpec::make(zero1, 1.0), GaussianSpec::make(zero1, 2.0), sched, 1.0);
  out.push_back(upper("theorem1_1d_value_err", std::abs(frozen.kl_difference - 0.060508), 1e-6));
  out.push_back(upper("theorem1_1d_route_gap",
                      std::abs(frozen.quadrature - frozen.kl_difference) / std::abs(frozen.kl_difference),
                      0.01));

  std::uniform_real_distribution<double> uv(0.3, 3.0), um(-2.0, 2.0), ut(0.1, 2.0);
  const Index dims[] = {1, 2, 4};
  double min_value = std::numeric_limits<double>::infinity();
  double max_gap = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    Index d = dims[i % 3];
    Tensor mp = Tensor::zeros(Shape{d}), mq = Tensor::zeros(Shape{d});
    for (Index j = 0; j < d; ++j) {
      mp[j] = um(rng);
      mq[j] = um(rng);
    }
    DcdResult r =
        dcd_gaussian(GaussianSpec::make(mp, uv(rng)), GaussianSpec::make(mq, uv(rng)), sched, ut(rng));
    min_value = std::min(min_value, std::min(r.kl_difference, r.quadrature));
    max_gap = std::max(max_gap, std::abs(r.quadrature - r.kl_difference) /
                                    (std::abs(r.kl_difference) + 1e-12));
  }
  out.push_back(lower("theorem1_random_min", min_value, 0.0));
  out.push_back(upper("theorem1_random_max_route_gap", max_gap, 0.01));

  // monotone KL along a grid, one fixed and one randomized pair
  std::vector<double> grid;
  for (int i = 0; i <= 8; ++i) grid.push_back(0.25 * i);
  double viol = kl_monotone_check(GaussianSpec::make(zero1, 1.0), GaussianSpec::make(zero1, 2.0), sched, grid)
                    .max_violation;
  Tensor m2 = Tensor::zeros(Shape{2});
  m2[0] = 1.3;
  m2[1] = -0.4;
  viol = std::max(viol, kl_monotone_check(GaussianSpec::make(m2, 0.7), GaussianSpec::standard(2), sched, grid)
                            .max_violation);
  out.push_back(upper("kl_monotone_max_violation", viol, 0.0));
  return out;
}

std::vector<PropertyResult> verify_gradients(int n_probes, double h, Rng& rng) {
  std::vector<PropertyResult> out;
  Rng data_rng(rng());
  Tensor x0 = randn(data_rng, Shape{128, 2});
  x0.flat() *= 1.5;

  const std::uint64_t seed_a = rng(), seed_b = rng();
  MlpEbm model = init_params({2, 300, 300, 300, 1}, seed_a);

  {
    auto ctor = [&](const MlpEbm& m) {
      Rng r(seed_b);
      return dcd_ve_loss(m, x0, 5e-4, VeSchedule::constant(1.0), LaplacianSpec{}, r);
    };
    out.push_back(upper("grad_dcd_ve_max_rel_err", grad_check(ctor, model, n_probes, h, rng), 1e-4));
  }
  {
    Rng chain_rng(seed_b + 1);
    Tensor neg = langevin_run(model, x0, LangevinConfig{0.001, 10, true}, chain_rng);
    auto ctor = [&](const MlpEbm& m) { return energy_gap_loss(m, neg, x0); };
    out.push_back(upper("grad_cd_max_rel_err", grad_check(ctor, model, n_probes, h, rng), 1e-4));
  }
  {
    auto ctor = [&](const MlpEbm& m) {
      Rng r(seed_b + 2);
      return sm_eval_loss(m, x0, LaplacianSpec{}, r);
    };
    out.push_back(upper("grad_sm_eval_max_rel_err", grad_check(ctor, model, n_probes, h, rng), 1e-4));
  }
  return out;
}

std::vector<PropertyResult> verify_identities(Rng& rng) {
  std::vector<PropertyResult> out;

  {  // Stein identity under N(0, I) with a random MLP score field
    MlpEbm m = init_params({2, 32, 32, 1}, rng());
    const Index n = 20000;
    Tensor x = randn(rng, Shape{n, 2});
    Tensor s = score(m, x);
    Tensor div = laplacian_exact(m, x);
    double mean = 0.0, m2 = 0.0;
    for (Index r = 0; r < n; ++r) {
      double v = -(s(r, 0) * x(r, 0) + s(r, 1) * x(r, 1)) + div[r];
      mean += v;
      m2 += v * v;
    }
    mean /= static_cast<double>(n);
    const double var = m2 / static_cast<double>(n) - mean * mean;
    const double se = std::sqrt(var / static_cast<double>(n));
    out.push_back(upper("stein_identity_abs_mean", std::abs(mean), 3.0 * se));
  }
  {  // Lap p = p |grad log p|^2 + p Lap log p for Gaussian densities
    double max_gap = 0.0;
    for (double s2 : {0.5, 1.0, 2.5}) {
      for (int trial = 0; trial < 40; ++trial) {
        Tensor x = randn(rng, Shape{2}), mu = randn(rng, Shape{2});
        double q = 0.0;
        for (Index j = 0; j < 2; ++j) q += (x[j] - mu[j]) * (x[j] - mu[j]);
        const double p = std::exp(-0.5 * q / s2) / (2.0 * M_PI * s2);
        const double lhs = p * (q / (s2 * s2) - 2.0 / s2);
        const double rhs = p * (q / (s2 * s2)) + p * (-2.0 / s2);
        max_gap = std::max(max_gap, std::abs(lhs - rhs));
      }
    }
    out.push_back(upper("lemma1_max_gap", max_gap, 1e-10));
  }
  {  // Hutchinson with Rademacher probes on Hessian -I is exactly -D
    double max_err = 0.0;
    for (Index d : {Index(2), Index(5)}) {
      QuadraticEbm q = QuadraticEbm::isotropic_gaussian(d);
      Tensor x = randn(rng, Shape{16, d});
      Tensor est = hutchinson_laplacian(q, x, 1, ProbeDist::kRademacher, rng);
      for (Index r = 0; r < 16; ++r) max_err = std::max(max_err, std::abs(est[r] + static_cast<double>(d)));
    }
    out.push_back(upper("hutchinson_quadratic_max_err", max_err, 1e-12));
  }
  {  // additive-constant invariance of the three losses and their gradients
    Tensor x0 = randn(rng, Shape{64, 2});
    MlpEbm m = init_params({2, 24, 24, 1}, rng());
    MlpEbm shifted = m;
    shifted.params.back()[0] += 7.5;
    auto box = bounding_box(x0);
    const std::uint64_t s = rng();

    double loss_gap = 0.0, grad_gap = 0.0;
    auto compare = [&](LossGraph&& a, LossGraph&& b) {
      auto ga = a.evaluate_with_grads();
      auto gb = b.evaluate_with_grads();
      loss_gap = std::max(loss_gap, std::abs(a.value - b.value));
      for (size_t i = 0; i < ga.size(); ++i)
        grad_gap = std::max(grad_gap, (ga[i].flat() - gb[i].flat()).abs().maxCoeff());
    };
    {
      Rng r1(s), r2(s);
      compare(dcd_ve_loss(m, x0, 5e-4, VeSchedule::constant(1.0), LaplacianSpec{}, r1),
              dcd_ve_loss(shifted, x0, 5e-4, VeSchedule::constant(1.0), LaplacianSpec{}, r2));
    }
    {
      Rng r1(s), r2(s);
      compare(cd_loss(m, x0, LangevinConfig{0.001, 10, true}, r1),
              cd_loss(shifted, x0, LangevinConfig{0.001, 10, true}, r2));
    }
    {
      Rng r1(s), r2(s);
      ReplayBuffer b1(640, box.first, box.second, 0.05), b2(640, box.first, box.second, 0.05);
      compare(pcd_loss(m, x0, b1, LangevinConfig{0.001, 5, true}, r1),
              pcd_loss(shifted, x0, b2, LangevinConfig{0.001, 5, true}, r2));
    }
    out.push_back(upper("additive_invariance_loss_gap", loss_gap, 1e-10));
    out.push_back(upper("additive_invariance_grad_gap", grad_gap, 1e-10));
  }
  return out;
}

std::vector<PropertyResult> verify_langevin(Index particles, int steps, Rng& rng) {
  std::vector<PropertyResult> out;
  QuadraticEbm q = QuadraticEbm::isotropic_gaussian(2);
  Tensor x = randn(rng, Shape{particles, 2});
  LangevinConfig cfg{0.001, steps, true};
  Tensor end = langevin_run(q, x, cfg, rng);
  const double mean = end.flat().mean();
  const double var = (end.flat() - mean).square().sum() / static_cast<double>(end.size() - 1);
  out.push_back(upper("langevin_abs_mean", std::abs(mean), 0.01));
  out.push_back(upper("langevin_var_err", std::abs(var - 1.0), 0.05));
  return out;
}

}  // namespace dcd
