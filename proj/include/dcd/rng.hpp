#pragma once

#include <random>

#include "dcd/tensor.hpp"

namespace dcd {

using Rng = std::mt19937_64;

Tensor randn(Rng& rng, const Shape& shape);
Tensor rand_uniform(Rng& rng, const Shape& shape, double lo, double hi);
/// iid +1/-1 entries.
Tensor rademacher(Rng& rng, const Shape& shape);

}  // namespace dcd
