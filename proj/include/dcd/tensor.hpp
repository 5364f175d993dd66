#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcd {

using Index = Eigen::Index;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Shape of a Tensor: rank 0 (scalar), 1 (vector) or 2 (matrix).
struct Shape {
  std::vector<Index> dims;

  Shape() = default;
  Shape(std::initializer_list<Index> d) : dims(d) {}
  explicit Shape(std::vector<Index> d) : dims(std::move(d)) {}

  int rank() const { return static_cast<int>(dims.size()); }
  Index count() const {
    Index n = 1;
    for (Index d : dims) n *= d;
    return n;
  }
  Index rows() const { return dims.at(0); }
  Index cols() const { return dims.at(1); }

  bool operator==(const Shape& o) const { return dims == o.dims; }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const;
};

/// Dense 64-bit tensor, elements stored flat in row-major order.
class Tensor {
 public:
  Tensor() : shape_{}, data_(1) { data_[0] = 0.0; }
  Tensor(Shape shape, Vec data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.count()) throw std::invalid_argument("Tensor: element count does not match shape");
  }

  static Tensor scalar(double v);
  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, double v);
  static Tensor from_vec(Vec v);
  static Tensor from_mat(const RowMat& m);

  const Shape& shape() const { return shape_; }
  int rank() const { return shape_.rank(); }
  Index size() const { return data_.size(); }
  Index rows() const { return shape_.rows(); }
  Index cols() const { return shape_.cols(); }

  double value() const {
    if (rank() != 0) throw std::logic_error("Tensor::value on non-scalar of shape " + shape_.str());
    return data_[0];
  }

  double operator[](Index i) const { return data_[i]; }
  double& operator[](Index i) { return data_[i]; }
  double operator()(Index r, Index c) const { return data_[r * cols() + c]; }
  double& operator()(Index r, Index c) { return data_[r * cols() + c]; }

  Eigen::Map<const RowMat> mat() const {
    if (rank() != 2) throw std::logic_error("Tensor::mat on rank-" + std::to_string(rank()));
    return {data_.data(), shape_.rows(), shape_.cols()};
  }
  Eigen::Map<RowMat> mat() {
    if (rank() != 2) throw std::logic_error("Tensor::mat on rank-" + std::to_string(rank()));
    return {data_.data(), shape_.rows(), shape_.cols()};
  }
  Eigen::Map<const Vec> vec() const {
    if (rank() != 1) throw std::logic_error("Tensor::vec on rank-" + std::to_string(rank()));
    return {data_.data(), data_.size()};
  }
  Eigen::Map<Vec> vec() {
    if (rank() != 1) throw std::logic_error("Tensor::vec on rank-" + std::to_string(rank()));
    return {data_.data(), data_.size()};
  }

  /// Flat view over the elements regardless of rank.
  Eigen::Map<const Eigen::ArrayXd> flat() const { return {data_.data(), data_.size()}; }
  Eigen::Map<Eigen::ArrayXd> flat() { return {data_.data(), data_.size()}; }

  const double* data() const { return data_.data(); }
  double* data() { return data_.data(); }

  bool all_finite() const { return flat().isFinite().all(); }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  Shape shape_;
  Vec data_;
};

}  // namespace dcd
