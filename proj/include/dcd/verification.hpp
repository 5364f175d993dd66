#pragma once

#include <string>
#include <vector>

#include "dcd/oracles.hpp"

namespace dcd {

/// One verified property: pass iff value <= tolerance unless the check is a
/// lower bound (named *_min, pass iff value >= tolerance).
struct PropertyResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Divergence-identity suite: the frozen 1-D pair, then randomized Gaussian
/// pairs checked for non-negativity and two-route agreement.
std::vector<PropertyResult> verify_theorem1(int n_pairs, Rng& rng);

/// Autodiff parameter gradients of the three objectives against central
/// finite differences on random 2-D MLPs.
std::vector<PropertyResult> verify_gradients(int n_probes, double h, Rng& rng);

/// Stein identity, the Laplacian log-density identity, Hutchinson exactness
/// on quadratic energies, and additive-constant invariance.
std::vector<PropertyResult> verify_identities(Rng& rng);

/// Langevin chains started in the standard Gaussian stay there.
std::vector<PropertyResult> verify_langevin(Index particles, int steps, Rng& rng);

}  // namespace dcd
