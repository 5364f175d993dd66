#include "dcd/sampler.hpp"

#include <cmath>

namespace dcd {

std::pair<Tensor, Tensor> bounding_box(const Tensor& data, double inflate) {
  if (data.rank() != 2 || data.rows() == 0) throw std::invalid_argument("bounding_box: need a non-empty matrix");
  const Index d = data.cols();
  Tensor lo = Tensor::zeros(Shape{d}), hi = Tensor::zeros(Shape{d});
  lo.vec() = data.mat().colwise().minCoeff().transpose();
  hi.vec() = data.mat().colwise().maxCoeff().transpose();
  for (Index j = 0; j < d; ++j) {
    const double c = 0.5 * (lo[j] + hi[j]);
    double half = 0.5 * (hi[j] - lo[j]);
    if (half == 0.0) half = 1.0;  // degenerate column: give the box some width
    lo[j] = c - (1.0 + inflate) * half;
    hi[j] = c + (1.0 + inflate) * half;
  }
  return {lo, hi};
}

ReplayBuffer::ReplayBuffer(Index capacity, Tensor box_lo, Tensor box_hi, double reinit_fraction)
    : capacity_(capacity),
      reinit_fraction_(reinit_fraction),
      box_lo_(std::move(box_lo)),
      box_hi_(std::move(box_hi)) {
  if (capacity_ <= 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  if (reinit_fraction_ < 0.0 || reinit_fraction_ > 1.0)
    throw std::invalid_argument("ReplayBuffer: reinit_fraction must lie in [0,1]");
  if (box_lo_.shape() != box_hi_.shape() || box_lo_.rank() != 1)
    throw std::invalid_argument("ReplayBuffer: box bounds must be matching vectors");
  rows_ = Tensor::zeros(Shape{capacity_, box_lo_.size()});
}

Tensor ReplayBuffer::init_sample(Index n, Rng& rng) const {
  Tensor out = Tensor::zeros(Shape{n, dim()});
  for (Index r = 0; r < n; ++r)
    for (Index j = 0; j < dim(); ++j) {
      std::uniform_real_distribution<double> u(box_lo_[j], box_hi_[j]);
      out(r, j) = u(rng);
    }
  return out;
}

void ReplayBuffer::insert(const Tensor& rows, Rng& rng) {
  if (rows.rank() != 2 || rows.cols() != dim()) throw std::invalid_argument("ReplayBuffer::insert: bad shape");
  for (Index r = 0; r < rows.rows(); ++r) {
    Index slot;
    if (size_ < capacity_) {
      slot = size_++;
    } else {
      std::uniform_int_distribution<Index> pick(0, capacity_ - 1);
      slot = pick(rng);
    }
    rows_.mat().row(slot) = rows.mat().row(r);
  }
}

Tensor ReplayBuffer::row(Index i) const {
  Tensor out = Tensor::zeros(Shape{1, dim()});
  out.mat() = rows_.mat().row(i);
  return out;
}

Tensor ReplayBuffer::draw(Index batch, Rng& rng) {
  if (batch <= 0) throw std::invalid_argument("ReplayBuffer::draw: batch must be positive");
  const Index n_reinit = static_cast<Index>(std::llround(reinit_fraction_ * static_cast<double>(batch)));
  Tensor out = Tensor::zeros(Shape{batch, dim()});
  Index filled = 0;
  if (n_reinit > 0) {
    Tensor fresh = init_sample(n_reinit, rng);
    out.mat().topRows(n_reinit) = fresh.mat();
    filled = n_reinit;
  }
  for (Index r = filled; r < batch; ++r) {
    if (size_ == 0) {
      Tensor one = init_sample(1, rng);
      out.mat().row(r) = one.mat().row(0);
    } else {
      std::uniform_int_distribution<Index> pick(0, size_ - 1);
      out.mat().row(r) = rows_.mat().row(pick(rng));
    }
  }
  return out;
}

}  // namespace dcd
