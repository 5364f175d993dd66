#include "dcd/rng.hpp"

namespace dcd {

Tensor randn(Rng& rng, const Shape& shape) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t = Tensor::zeros(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

Tensor rand_uniform(Rng& rng, const Shape& shape, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t = Tensor::zeros(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

Tensor rademacher(Rng& rng, const Shape& shape) {
  Tensor t = Tensor::zeros(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = (rng() & 1u) ? 1.0 : -1.0;
  return t;
}

}  // namespace dcd
