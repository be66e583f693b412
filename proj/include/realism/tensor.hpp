#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <sstream>
#include <string>

#include "realism/error.hpp"

namespace realism {

using Index = Eigen::Index;

/// NCHW shape. Rank-2 data (batch x features) uses (N, F, 1, 1).
struct Shape {
  Index n = 0, c = 0, h = 1, w = 1;

  Index count() const { return n * c * h * w; }
  Index per_sample() const { return c * h * w; }
  Index plane() const { return h * w; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
  }
};

/// Dense contiguous NCHW tensor over an Eigen column vector.
template <typename Scalar>
struct Tensor {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using ConstMatrixMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>;
  using MatrixMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>;

  Shape shape;
  Vector data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), data(Vector::Zero(s.count())) {}
  Tensor(Shape s, Vector v) : shape(s), data(std::move(v)) {
    if (data.size() != shape.count()) throw ShapeMismatch("tensor data does not match shape " + shape.str());
  }

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor constant(Shape s, Scalar v) { return Tensor(s, Vector::Constant(s.count(), v)); }

  Index size() const { return data.size(); }
  bool empty() const { return data.size() == 0; }

  Scalar& at(Index n, Index c, Index h, Index w) {
    return data[((n * shape.c + c) * shape.h + h) * shape.w + w];
  }
  Scalar at(Index n, Index c, Index h, Index w) const {
    return data[((n * shape.c + c) * shape.h + h) * shape.w + w];
  }

  /// Sample `n` as an (H*W, C) column-major matrix, one column per channel plane.
  ConstMatrixMap sample_planes(Index n) const {
    return ConstMatrixMap(data.data() + n * shape.per_sample(), shape.plane(), shape.c);
  }
  MatrixMap sample_planes(Index n) {
    return MatrixMap(data.data() + n * shape.per_sample(), shape.plane(), shape.c);
  }

  /// (features, N) view, one column per sample.
  ConstMatrixMap as_columns() const { return ConstMatrixMap(data.data(), shape.per_sample(), shape.n); }
  MatrixMap as_columns() { return MatrixMap(data.data(), shape.per_sample(), shape.n); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape, data.template cast<Other>());
  }
};

}  // namespace realism
