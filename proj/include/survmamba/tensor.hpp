/*
 * Copyright 2026 The survmamba Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "survmamba/error.hpp"

namespace survmamba {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape)
{
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape)
{
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

///////////////////////////////////////////
// Dense row-major tensor of rank 1 or 2
///////////////////////////////////////////

// Rank-1 tensors view as a single row when treated as a matrix. A scalar is
// the rank-1 tensor of shape [1].
template <typename Scalar>
class BasicTensor {
 public:
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  BasicTensor() : shape_{1}, data_(Storage::Zero(1)) {}

  explicit BasicTensor(Shape shape) : shape_(std::move(shape))
  {
    validate_shape();
    data_ = Storage::Zero(shape_size(shape_));
  }

  BasicTensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data))
  {
    validate_shape();
    if (data_.size() != shape_size(shape_))
      fail(ErrorKind::Dimension, "data length " + std::to_string(data_.size()) +
                                     " does not match shape " + shape_str(shape_));
  }

  template <typename Derived>
  static BasicTensor from_matrix(const Eigen::MatrixBase<Derived>& m)
  {
    BasicTensor t({m.rows(), m.cols()});
    t.matrix() = m;
    return t;
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }

  static BasicTensor constant(Shape shape, Scalar value)
  {
    BasicTensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  static BasicTensor scalar(Scalar value) { return constant({1}, value); }

  static BasicTensor vector(std::initializer_list<Scalar> values)
  {
    BasicTensor t({static_cast<Index>(values.size())});
    std::copy(values.begin(), values.end(), t.data());
    return t;
  }

  static BasicTensor matrix(std::initializer_list<std::initializer_list<Scalar>> rows)
  {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r ? static_cast<Index>(rows.begin()->size()) : 0;
    BasicTensor t({r, c});
    Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != c) fail(ErrorKind::Dimension, "ragged matrix literal");
      std::copy(row.begin(), row.end(), t.data() + i * c);
      ++i;
    }
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index size() const noexcept { return data_.size(); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }

  Index rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
  Index cols() const noexcept { return shape_.back(); }

  Scalar* data() noexcept { return data_.data(); }
  const Scalar* data() const noexcept { return data_.data(); }

  Storage& storage() noexcept { return data_; }
  const Storage& storage() const noexcept { return data_; }

  auto array() noexcept { return data_.array(); }
  auto array() const noexcept { return data_.array(); }

  MatrixMap matrix() noexcept { return MatrixMap(data_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const noexcept { return ConstMatrixMap(data_.data(), rows(), cols()); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }
  Scalar& operator()(Index r, Index c) { return data_[r * cols() + c]; }
  Scalar operator()(Index r, Index c) const { return data_[r * cols() + c]; }

  Scalar item() const
  {
    if (size() != 1) fail(ErrorKind::Contract, "item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  bool same_shape(const BasicTensor& other) const noexcept { return shape_ == other.shape_; }

  bool all_finite() const { return data_.array().isFinite().all(); }

  BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), data_); }

  template <typename Other>
  BasicTensor<Other> cast() const
  {
    return BasicTensor<Other>(shape_, data_.template cast<Other>());
  }

 private:
  void validate_shape() const
  {
    if (shape_.empty() || shape_.size() > 2)
      fail(ErrorKind::Dimension, "tensor rank must be 1 or 2, got shape " + shape_str(shape_));
    for (Index e : shape_)
      if (e <= 0) fail(ErrorKind::Dimension, "non-positive extent in shape " + shape_str(shape_));
  }

  Shape shape_;
  Storage data_;
};

using Tensor = BasicTensor<double>;

}  // namespace survmamba
