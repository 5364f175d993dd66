#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include "dcd/model.hpp"
#include "dcd/rng.hpp"

namespace dcd {

struct LangevinConfig {
  double step_size = 1e-3;  // epsilon, in time units
  int n_steps = 10;
  bool noise_on = true;
};

/// A chain iterate went non-finite; carries the step at which it happened.
struct ChainDivergedError : std::runtime_error {
  explicit ChainDivergedError(int step)
      : std::runtime_error("langevin chain diverged at step " + std::to_string(step)), step(step) {}
  int step;
};

/// Euler-Maruyama discretization of dx = 1/2 grad f dt + dw with dt = eps:
/// x <- x + (eps/2) score(x) + sqrt(eps) xi. The result is a plain tensor, so
/// downstream losses carry no parameter dependence through the samples (the
/// stop-gradient convention).
template <class Model>
Tensor langevin_run(const Model& m, const Tensor& x_init, const LangevinConfig& cfg, Rng& rng) {
  if (!(cfg.step_size > 0.0)) throw std::invalid_argument("langevin_run: step_size must be positive");
  if (cfg.n_steps < 0) throw std::invalid_argument("langevin_run: n_steps must be >= 0");
  if (!x_init.all_finite()) throw std::invalid_argument("langevin_run: non-finite start");

  Graph g;
  auto ids = declare_params(g, m);
  NodeId xin = g.input(x_init.shape());
  NodeId s = score_node(g, energy_node(g, m, ids, xin), xin);
  Bindings bind = param_bindings(m, ids);

  Tensor x = x_init;
  const double drift = 0.5 * cfg.step_size;
  const double diff = std::sqrt(cfg.step_size);
  for (int k = 0; k < cfg.n_steps; ++k) {
    bind[xin.v] = x;
    Tensor sc;
    try {
      sc = g.eval(s, bind);
    } catch (const NonFiniteError&) {
      throw ChainDivergedError(k);
    }
    x.flat() += drift * sc.flat();
    if (cfg.noise_on) x.flat() += diff * randn(rng, x.shape()).flat();
    if (!x.all_finite()) throw ChainDivergedError(k);
  }
  return x;
}

/// Noise-free gradient ascent from a noisy input; deterministic given
/// (model, input, cfg).
template <class Model>
Tensor denoise(const Model& m, const Tensor& x_noisy, LangevinConfig cfg) {
  cfg.noise_on = false;
  Rng unused(0);
  return langevin_run(m, x_noisy, cfg, unused);
}

/// Axis-aligned bounding box of the data rows, inflated around its center.
std::pair<Tensor, Tensor> bounding_box(const Tensor& data, double inflate = 0.1);

/// Persistent-chain sample store. Writebacks append until capacity, then
/// overwrite uniformly random slots; a reinit fraction of every batch starts
/// fresh from the uniform box distribution.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(Index capacity, Tensor box_lo, Tensor box_hi, double reinit_fraction);

  Index capacity() const { return capacity_; }
  Index size() const { return size_; }
  Index dim() const { return box_lo_.size(); }
  double reinit_fraction() const { return reinit_fraction_; }

  Tensor init_sample(Index n, Rng& rng) const;
  /// Row-copy into the buffer (e.g. seeding with data).
  void insert(const Tensor& rows, Rng& rng);
  Tensor row(Index i) const;

  /// Assembles a batch (reinit fraction fresh, rest drawn from the store).
  Tensor draw(Index batch, Rng& rng);

 private:
  Index capacity_ = 0;
  Index size_ = 0;
  double reinit_fraction_ = 0.0;
  Tensor box_lo_, box_hi_;
  Tensor rows_;  // (capacity, D)
};

/// PCD step: draw persistent samples, run the chain, write results back.
/// Returns detached negatives; the buffer is updated in place.
template <class Model>
Tensor pcd_negatives(Model const& m, ReplayBuffer& buffer, Index batch_size, const LangevinConfig& cfg,
                     Rng& rng) {
  if (buffer.capacity() == 0) throw std::invalid_argument("pcd_negatives: empty buffer");
  Tensor start = buffer.draw(batch_size, rng);
  Tensor out = langevin_run(m, start, cfg, rng);
  buffer.insert(out, rng);
  return out;
}

}  // namespace dcd
