// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "ocs/error.hpp"

namespace ocs {

template <typename Scalar>
using MatrixX =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense n-d tensor with row-major (NCHW-style) flat storage. All layer
/// kernels view the buffer through Eigen maps; the tensor itself only owns
/// shape and data.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(count(shape_)), Scalar(0));
  }

  Tensor(std::vector<int> shape, std::vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != static_cast<std::int64_t>(data_.size()))
      throw ShapeError("tensor data length does not match shape");
  }

  static std::int64_t count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw ShapeError("non-positive tensor dimension");
      n *= d;
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::vector<Scalar>& storage() { return data_; }
  const std::vector<Scalar>& storage() const { return data_; }

  Scalar& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// 2-d Eigen view; rows*cols must cover the whole buffer.
  Eigen::Map<MatrixX<Scalar>> mat(std::int64_t rows, std::int64_t cols) {
    if (rows * cols != size()) throw ShapeError("matrix view size mismatch");
    return Eigen::Map<MatrixX<Scalar>>(data(), rows, cols);
  }
  Eigen::Map<const MatrixX<Scalar>> mat(std::int64_t rows,
                                        std::int64_t cols) const {
    if (rows * cols != size()) throw ShapeError("matrix view size mismatch");
    return Eigen::Map<const MatrixX<Scalar>>(data(), rows, cols);
  }

  Eigen::Map<VectorX<Scalar>> vec() {
    return Eigen::Map<VectorX<Scalar>>(data(), size());
  }
  Eigen::Map<const VectorX<Scalar>> vec() const {
    return Eigen::Map<const VectorX<Scalar>>(data(), size());
  }

  bool all_finite() const {
    for (const Scalar& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    for (std::int64_t i = 0; i < size(); ++i)
      out[i] = static_cast<Other>(data_[static_cast<std::size_t>(i)]);
    return out;
  }

 private:
  std::vector<int> shape_;
  std::vector<Scalar> data_;
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace ocs
