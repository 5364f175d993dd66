#include <doctest.h>

#include <cmath>

#include "dcd/oracles.hpp"

using namespace dcd;

namespace {

GaussianSpec g1d(double mean, double var) {
  Tensor m = Tensor::zeros(Shape{1});
  m[0] = mean;
  return GaussianSpec::make(std::move(m), var);
}

}  // namespace

TEST_CASE("gaussian_kl_ve closed forms") {
  VeSchedule sched = VeSchedule::constant(1.0, 4.0);

  SUBCASE("identical distributions: zero at every time") {
    GaussianSpec p = g1d(0.3, 1.7);
    for (double t : {0.0, 0.5, 2.0}) CHECK(gaussian_kl_ve(p, p, sched, t) == 0.0);
  }
  SUBCASE("N(0,1) vs N(0,2): 1/2(1/2 - 1 + ln 2)") {
    const double expected = 0.5 * (0.5 - 1.0 + std::log(2.0));  // 0.0965735...
    CHECK(expected == doctest::Approx(0.096574).epsilon(1e-5));
    CHECK(gaussian_kl_ve(g1d(0, 1), g1d(0, 2), sched, 0.0) == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("the same pair at t=1 has variances 2 and 3") {
    const double expected = 0.5 * (2.0 / 3.0 - 1.0 + std::log(1.5));  // 0.0360658...
    CHECK(expected == doctest::Approx(0.036066).epsilon(1e-4));
    CHECK(gaussian_kl_ve(g1d(0, 1), g1d(0, 2), sched, 1.0) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("dcd_gaussian: the two routes agree (divergence identity)") {
  VeSchedule sched = VeSchedule::constant(1.0, 4.0);

  SUBCASE("frozen 1-D value 0.060508 over T=1") {
    DcdResult r = dcd_gaussian(g1d(0, 1), g1d(0, 2), sched, 1.0);
    CHECK(r.kl_difference == doctest::Approx(0.060508).epsilon(1e-4));
    CHECK(std::abs(r.quadrature - r.kl_difference) < 0.01 * std::abs(r.kl_difference));
  }
  SUBCASE("identical distributions: zero by both routes") {
    DcdResult r = dcd_gaussian(g1d(0.4, 1.3), g1d(0.4, 1.3), sched, 2.0);
    CHECK(r.kl_difference == 0.0);
    CHECK(std::abs(r.quadrature) < 1e-14);
  }
  SUBCASE("random pairs: non-negative, two routes within 1%") {
    Rng rng(99);
    std::uniform_real_distribution<double> uv(0.3, 3.0), um(-2.0, 2.0), ut(0.1, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
      for (Index d : {Index(1), Index(2), Index(4)}) {
        Tensor mp = Tensor::zeros(Shape{d}), mq = Tensor::zeros(Shape{d});
        for (Index j = 0; j < d; ++j) {
          mp[j] = um(rng);
          mq[j] = um(rng);
        }
        GaussianSpec p = GaussianSpec::make(mp, uv(rng));
        GaussianSpec q = GaussianSpec::make(mq, uv(rng));
        DcdResult r = dcd_gaussian(p, q, sched, ut(rng));
        CHECK(r.kl_difference >= 0.0);
        CHECK(r.quadrature >= 0.0);
        CHECK(std::abs(r.quadrature - r.kl_difference) <= 0.01 * (std::abs(r.kl_difference) + 1e-12));
      }
    }
  }
  SUBCASE("linear schedule also satisfies the identity") {
    VeSchedule lin = VeSchedule::linear(3.0);
    DcdResult r = dcd_gaussian(g1d(1.0, 0.5), g1d(-0.5, 2.0), lin, 2.0);
    CHECK(r.kl_difference > 0.0);
    CHECK(std::abs(r.quadrature - r.kl_difference) < 0.01 * r.kl_difference);
  }
}

TEST_CASE("kl_monotone_check") {
  VeSchedule sched = VeSchedule::constant(1.0, 4.0);
  std::vector<double> grid;
  for (int i = 0; i <= 8; ++i) grid.push_back(0.25 * i);

  SUBCASE("Gaussian pair: no violation over the grid") {
    MonotoneReport rep = kl_monotone_check(g1d(0, 1), g1d(0, 2), sched, grid);
    CHECK(rep.max_violation == 0.0);
    CHECK(rep.kl_values.front() > rep.kl_values.back());
  }
  SUBCASE("p = q: the constant zero sequence") {
    MonotoneReport rep = kl_monotone_check(g1d(0.7, 1.1), g1d(0.7, 1.1), sched, grid);
    for (double v : rep.kl_values) CHECK(v == 0.0);
    CHECK(rep.max_violation == 0.0);
  }
  SUBCASE("widely separated means: decreasing and small at large T") {
    // KL decays like |mean gap|^2 / (2(1+t)); run the grid far enough out
    VeSchedule long_sched = VeSchedule::constant(1.0, 10.0);
    std::vector<double> long_grid;
    for (int i = 0; i <= 8; ++i) long_grid.push_back(static_cast<double>(i));
    MonotoneReport rep = kl_monotone_check(g1d(-3, 1), g1d(3, 1), long_sched, long_grid);
    CHECK(rep.max_violation == 0.0);
    CHECK(rep.kl_values.back() < 0.2 * rep.kl_values.front());
  }
}

TEST_CASE("grad_check: autodiff gradients against central differences") {
  Rng data_rng(5);
  Tensor x0 = randn(data_rng, Shape{24, 2});
  MlpEbm model = init_params({2, 12, 12, 1}, 31);
  const double h = 1e-5;

  SUBCASE("dcd_ve_loss (third-order path)") {
    auto ctor = [&](const MlpEbm& m) {
      Rng r(777);
      return dcd_ve_loss(m, x0, 5e-4, VeSchedule::constant(1.0), LaplacianSpec{}, r);
    };
    Rng rng(1);
    CHECK(grad_check(ctor, model, 10, h, rng) < 1e-4);
  }
  SUBCASE("dcd_ve_loss with Hutchinson Laplacian") {
    auto ctor = [&](const MlpEbm& m) {
      Rng r(778);
      LaplacianSpec lap{LaplacianMode::kHutchinson, 2, false};
      return dcd_ve_loss(m, x0, 5e-4, VeSchedule::constant(1.0), lap, r);
    };
    Rng rng(2);
    CHECK(grad_check(ctor, model, 10, h, rng) < 1e-4);
  }
  SUBCASE("sm_eval_loss") {
    auto ctor = [&](const MlpEbm& m) {
      Rng r(779);
      return sm_eval_loss(m, x0, LaplacianSpec{}, r);
    };
    Rng rng(3);
    CHECK(grad_check(ctor, model, 10, h, rng) < 1e-4);
  }
  SUBCASE("cd_loss given its stop-gradient samples") {
    Rng chain_rng(780);
    Tensor neg = langevin_run(model, x0, LangevinConfig{0.001, 10, true}, chain_rng);
    auto ctor = [&](const MlpEbm& m) { return energy_gap_loss(m, neg, x0); };
    Rng rng(4);
    CHECK(grad_check(ctor, model, 10, h, rng) < 1e-4);
  }
  SUBCASE("constant-energy model: both gradients vanish") {
    MlpEbm flat = model;
    for (Tensor& p : flat.params) p.flat() = 0.0;
    auto ctor = [&](const MlpEbm& m) {
      Rng r(781);
      return dcd_ve_loss(m, x0, 5e-4, VeSchedule::constant(1.0), LaplacianSpec{}, r);
    };
    // compare raw values rather than ratios
    LossGraph L = ctor(flat);
    auto gids = L.graph.grad(L.loss, L.params);
    auto gvals = L.graph.eval(std::span<const NodeId>(gids.data(), gids.size()), L.bindings);
    (void)gvals;
    Rng rng(5);
    double err = grad_check(ctor, flat, 10, h, rng);
    CHECK(err < 1e-6);  // normalized error; gradients are ~0 on both sides
  }
}
