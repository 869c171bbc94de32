// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "gapnet/error.hpp"

namespace gapnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major N-d array. Rank-3 image tensors are channel-last [H x W x C].
///
/// Construction enforces rank >= 1, every extent >= 1 and
/// product(shape) == data.size(). The runtime uses BasicTensor<float>; the
/// gradient checker re-evaluates fragments with BasicTensor<double>.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  explicit BasicTensor(Shape shape);
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor full(Shape shape, T value);
  static BasicTensor vector(std::initializer_list<T> values);
  static BasicTensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values);
  static BasicTensor zeros_like(const BasicTensor& other) { return BasicTensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }

  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  T at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  T at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  T& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Same values under a new shape of equal element count.
  BasicTensor reshaped(Shape shape) const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  void fill(T value);

  bool all_finite() const noexcept;

  /// Exact equality of shape and element values.
  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Bitwise equality (distinguishes -0 from +0 and compares NaN payloads).
template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b);

enum class UnaryOp { kIdentity, kNegate, kRelu, kReluGrad, kSigmoid, kSquare, kExp, kSqrt };
enum class BinaryOp { kAdd, kSub, kMul, kDiv, kMax };

/// Standard matrix product [m x k] x [k x n] -> [m x n].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Rank-2 transpose.
template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);

/// Valid, stride-1 cross-correlation: out[t] = sum_k kernel[k] * x[t + k] + bias.
template <typename T>
BasicTensor<T> conv1d_valid(const BasicTensor<T>& x, const BasicTensor<T>& kernel, T bias);

/// Valid cross-correlation of x [H x W x Cin] with kernels [kh x kw x Cin x Cout].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias, std::size_t stride);

/// Output extent of a valid convolution along one axis.
std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride);

/// Global average over the spatial axes of [H x W x C] -> [C].
template <typename T>
BasicTensor<T> mean_over_spatial(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> map_elementwise(const BasicTensor<T>& x, UnaryOp op);

template <typename T>
BasicTensor<T> zip_elementwise(const BasicTensor<T>& a, const BasicTensor<T>& b, BinaryOp op);

/// Throws NonFinite naming `where` if any element is NaN or infinite.
template <typename T>
void require_finite(const BasicTensor<T>& t, const char* where);

}  // namespace gapnet
