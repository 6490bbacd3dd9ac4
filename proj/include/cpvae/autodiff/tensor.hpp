// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cpvae/error.hpp"

namespace cpvae {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) out += ", ";
    out += std::to_string(shape[k]);
  }
  return out + "]";
}

/// Dense row-major array of doubles. product(shape) == size() always holds.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(shape_size(shape_), fill) {
    check_shape();
  }
  Tensor(Shape shape, const std::vector<double>& values)
      : shape_(std::move(shape)), values_(values.begin(), values.end()) {
    check_shape();
    detail::require(values_.size() == shape_size(shape_),
                    "tensor value count does not match shape " + shape_string(shape_));
  }

  static Tensor from_matrix(const RowMatrix& m) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    t.matrix() = m;
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t k) const { return shape_.at(k); }
  std::size_t size() const noexcept { return values_.size(); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  /// Collapses leading dimensions: rows = product(shape[:-1]), cols = shape.back().
  MatrixMap matrix() { return {values_.data(), rows(), cols()}; }
  ConstMatrixMap matrix() const { return {values_.data(), rows(), cols()}; }

  Tensor reshaped(Shape shape) const {
    detail::require(shape_size(shape) == size(), "reshape must preserve element count");
    Tensor out;
    out.shape_ = std::move(shape);
    out.values_ = values_;
    return out;
  }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Eigen::Index rows() const {
    return shape_.empty() ? 1 : static_cast<Eigen::Index>(size() / std::max<std::size_t>(shape_.back(), 1));
  }
  Eigen::Index cols() const {
    return shape_.empty() ? 1 : static_cast<Eigen::Index>(shape_.back());
  }
  void check_shape() const {
    for (std::size_t d : shape_) detail::require(d > 0, "tensor dimensions must be positive");
  }

  Shape shape_;
  // Fixed alignment keeps vectorized reductions over matrix() bitwise reproducible.
  std::vector<double, Eigen::aligned_allocator<double>> values_;
};

/// Trainable tensor with a gradient buffer of identical shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Shape shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace cpvae
