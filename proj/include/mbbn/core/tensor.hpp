#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mbbn/core/error.hpp"
#include "mbbn/core/rng.hpp"

namespace mbbn {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct UniformFill {
  double lo = -1.0;
  double hi = 1.0;
};

/// Dense row-major tensor of arbitrary rank backed by an Eigen vector.
///
/// A default-constructed tensor is empty (rank 0, no elements) and is used as
/// "absent" for optional parameters such as a missing bias. Every other tensor
/// has all dims >= 1. Floating tensors reject NaN/Inf on construction.
template <typename Scalar>
class TensorT {
 public:
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixType = RowMajorMatrix<Scalar>;
  using MatrixMap = Eigen::Map<MatrixType>;
  using ConstMatrixMap = Eigen::Map<const MatrixType>;

  TensorT() = default;

  explicit TensorT(Shape shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_ = Storage::Constant(static_cast<Eigen::Index>(shape_numel(shape_)), fill);
    check_finite();
  }

  TensorT(Shape shape, std::vector<Scalar> values) : shape_(std::move(shape)) {
    check_shape(shape_);
    if (values.size() != shape_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape_string(shape_));
    }
    data_ = Eigen::Map<const Storage>(values.data(), static_cast<Eigen::Index>(values.size()));
    check_finite();
  }

  template <typename Derived>
  static TensorT from_matrix(const Eigen::MatrixBase<Derived>& m) {
    TensorT t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    t.matrix() = m;
    t.check_finite();
    return t;
  }

  static TensorT zeros(Shape shape) { return TensorT(std::move(shape), Scalar(0)); }
  static TensorT full(Shape shape, Scalar value) { return TensorT(std::move(shape), value); }

  static TensorT uniform(Shape shape, UniformFill fill, Rng& rng) {
    TensorT t(std::move(shape));
    for (Eigen::Index i = 0; i < t.data_.size(); ++i) {
      t.data_[i] = static_cast<Scalar>(rng.uniform(fill.lo, fill.hi));
    }
    return t;
  }

  static TensorT identity(std::size_t n) {
    TensorT t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = Scalar(1);
    return t;
  }

  bool empty() const { return shape_.empty(); }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }

  std::span<Scalar> values() { return {data_.data(), size()}; }
  std::span<const Scalar> values() const { return {data_.data(), size()}; }
  Storage& storage() { return data_; }
  const Storage& storage() const { return data_; }

  Scalar& operator[](std::size_t i) { return data_[static_cast<Eigen::Index>(i)]; }
  const Scalar& operator[](std::size_t i) const { return data_[static_cast<Eigen::Index>(i)]; }

  Scalar& operator()(std::size_t i, std::size_t j) { return data_[flat(i, j)]; }
  const Scalar& operator()(std::size_t i, std::size_t j) const { return data_[flat(i, j)]; }

  Scalar& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[flat(n, c, h, w)];
  }
  const Scalar& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[flat(n, c, h, w)];
  }

  /// Rank-2 view. Throws ShapeError for any other rank.
  MatrixMap matrix() {
    require_rank(2);
    return MatrixMap(data_.data(), rows(), cols());
  }
  ConstMatrixMap matrix() const {
    require_rank(2);
    return ConstMatrixMap(data_.data(), rows(), cols());
  }

  /// View with the leading dim kept and all trailing dims flattened.
  MatrixMap flat_rows() {
    return MatrixMap(data_.data(), static_cast<Eigen::Index>(shape_.at(0)),
                     static_cast<Eigen::Index>(size() / shape_.at(0)));
  }
  ConstMatrixMap flat_rows() const {
    return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(shape_.at(0)),
                          static_cast<Eigen::Index>(size() / shape_.at(0)));
  }

  TensorT reshaped(Shape shape) const {
    check_shape(shape);
    if (shape_numel(shape) != size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    TensorT t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  template <typename Other>
  TensorT<Other> cast() const {
    TensorT<Other> t(shape_);
    t.storage() = data_.template cast<Other>();
    return t;
  }

  Scalar sum() const { return data_.sum(); }

  friend bool operator==(const TensorT& a, const TensorT& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  void check_finite() const {
    if constexpr (std::is_floating_point_v<Scalar>) {
      if (!data_.allFinite()) throw DomainError("tensor contains non-finite values");
    }
  }

 private:
  static void check_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dim");
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("tensor dims must be >= 1, got " + shape_string(shape));
    }
  }

  void require_rank(std::size_t r) const {
    if (rank() != r) {
      throw ShapeError("expected rank " + std::to_string(r) + " tensor, got " + shape_string(shape_));
    }
  }

  Eigen::Index rows() const { return static_cast<Eigen::Index>(shape_[0]); }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(shape_[1]); }

  Eigen::Index flat(std::size_t i, std::size_t j) const {
    return static_cast<Eigen::Index>(i * shape_[1] + j);
  }
  Eigen::Index flat(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return static_cast<Eigen::Index>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w);
  }

  Shape shape_;
  Storage data_;
};

using Tensor = TensorT<double>;
using IntTensor = TensorT<std::int64_t>;

/// Real matrix product; the float reference every quantized path is checked against.
template <typename Scalar>
TensorT<Scalar> matmul(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul dim mismatch: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  TensorT<Scalar> out({a.dim(0), b.dim(1)});
  out.matrix().noalias() = a.matrix() * b.matrix();
  out.check_finite();
  return out;
}

/// a * b^T, the layout every layer uses (weights stored as [out, in]).
template <typename Scalar>
TensorT<Scalar> matmul_transposed(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_transposed dim mismatch: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()) + "^T");
  }
  TensorT<Scalar> out({a.dim(0), b.dim(0)});
  out.matrix().noalias() = a.matrix() * b.matrix().transpose();
  out.check_finite();
  return out;
}

template <typename Scalar, typename Fn>
TensorT<Scalar> map(const TensorT<Scalar>& x, Fn&& fn) {
  TensorT<Scalar> out = x;
  out.storage() = x.storage().unaryExpr(std::forward<Fn>(fn));
  out.check_finite();
  return out;
}

}  // namespace mbbn
