#include "dcd/tensor.hpp"

namespace dcd {

std::string Shape::str() const {
  std::string s = "(";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

Tensor Tensor::scalar(double v) {
  Vec d(1);
  d[0] = v;
  return Tensor(Shape{}, std::move(d));
}

Tensor Tensor::zeros(const Shape& s) { return Tensor(s, Vec::Zero(s.count())); }

Tensor Tensor::full(const Shape& s, double v) { return Tensor(s, Vec::Constant(s.count(), v)); }

Tensor Tensor::from_vec(Vec v) {
  Index n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::from_mat(const RowMat& m) {
  Tensor t = Tensor::zeros(Shape{m.rows(), m.cols()});
  t.mat() = m;
  return t;
}

}  // namespace dcd
