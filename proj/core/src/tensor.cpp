// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "gapnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace gapnet {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) fail(ErrorCode::kRankError, "tensor rank must be at least 1");
  for (auto e : shape) {
    if (e == 0) fail(ErrorCode::kShapeMismatch, "zero extent in shape " + shape_to_string(shape));
  }
}

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* where) {
  if (t.rank() != rank) {
    fail(ErrorCode::kRankError, std::string(where) + ": expected rank " + std::to_string(rank) +
                                    ", got " + shape_to_string(t.shape()));
  }
}

template <typename T>
T apply(UnaryOp op, T v) {
  switch (op) {
    case UnaryOp::kIdentity: return v;
    case UnaryOp::kNegate: return -v;
    case UnaryOp::kRelu: return v > T(0) ? v : T(0);
    case UnaryOp::kReluGrad: return v > T(0) ? T(1) : T(0);
    case UnaryOp::kSigmoid: {
      const T s = T(1) / (T(1) + std::exp(-v));
      constexpr T lo = std::numeric_limits<T>::denorm_min();
      const T hi = std::nextafter(T(1), T(0));
      return std::clamp(s, lo, hi);
    }
    case UnaryOp::kSquare: return v * v;
    case UnaryOp::kExp: return std::exp(v);
    case UnaryOp::kSqrt: return std::sqrt(v);
  }
  return v;
}

template <typename T>
T apply(BinaryOp op, T a, T b) {
  switch (op) {
    case BinaryOp::kAdd: return a + b;
    case BinaryOp::kSub: return a - b;
    case BinaryOp::kMul: return a * b;
    case BinaryOp::kDiv: return a / b;
    case BinaryOp::kMax: return std::max(a, b);
  }
  return a;
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_size(shape_), T(0));
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (shape_size(shape_) != data_.size()) {
    fail(ErrorCode::kShapeMismatch, "shape " + shape_to_string(shape_) + " does not hold " +
                                        std::to_string(data_.size()) + " values");
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value) {
  BasicTensor t(std::move(shape));
  t.fill(value);
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::vector(std::initializer_list<T> values) {
  return BasicTensor({values.size()}, std::vector<T>(values));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::matrix(std::size_t rows, std::size_t cols,
                                      std::initializer_list<T> values) {
  return BasicTensor({rows, cols}, std::vector<T>(values));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool BasicTensor<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

template <typename T>
void require_finite(const BasicTensor<T>& t, const char* where) {
  if (!t.all_finite()) fail(ErrorCode::kNonFinite, std::string(where) + " produced NaN/Inf");
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    fail(ErrorCode::kShapeMismatch, "matmul inner extents differ: " + shape_to_string(a.shape()) +
                                        " x " + shape_to_string(b.shape()));
  }
  BasicTensor<T> out({m, n});
  auto o = out.data();
  const auto av = a.data();
  const auto bv = b.data();
  if (n == 1) {
    // Matrix-vector: same summation order as the general loop below.
    for (std::size_t i = 0; i < m; ++i) {
      const T* arow = av.data() + i * k;
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) {
        if (arow[p] != T(0)) acc += arow[p] * bv[p];
      }
      o[i] = acc;
    }
    require_finite(out, "matmul");
    return out;
  }
  for (std::size_t i = 0; i < m; ++i) {
    T* row = o.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      if (aip == T(0)) continue;
      const T* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  require_finite(out, "matmul");
  return out;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.extent(0), n = a.extent(1);
  BasicTensor<T> out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

template <typename T>
BasicTensor<T> conv1d_valid(const BasicTensor<T>& x, const BasicTensor<T>& kernel, T bias) {
  require_rank(x, 1, "conv1d_valid");
  require_rank(kernel, 1, "conv1d_valid");
  const std::size_t n = x.size(), taps = kernel.size();
  if (taps > n) {
    fail(ErrorCode::kKernelTooLong, "kernel length " + std::to_string(taps) +
                                        " exceeds input length " + std::to_string(n));
  }
  BasicTensor<T> out({n - taps + 1});
  for (std::size_t t = 0; t < out.size(); ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < taps; ++k)
      acc += static_cast<double>(kernel[k]) * static_cast<double>(x[t + k]);
    out[t] = static_cast<T>(acc + static_cast<double>(bias));
  }
  require_finite(out, "conv1d_valid");
  return out;
}

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride) {
  if (stride == 0) fail(ErrorCode::kInvalidExtent, "stride must be positive");
  if (kernel == 0 || kernel > input) {
    fail(ErrorCode::kKernelTooLong, "kernel extent " + std::to_string(kernel) +
                                        " exceeds input extent " + std::to_string(input));
  }
  return (input - kernel) / stride + 1;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias, std::size_t stride) {
  require_rank(x, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  const std::size_t h = x.extent(0), w = x.extent(1), cin = x.extent(2);
  const std::size_t kh = kernels.extent(0), kw = kernels.extent(1), cout = kernels.extent(3);
  if (kernels.extent(2) != cin) {
    fail(ErrorCode::kShapeMismatch, "conv2d input has " + std::to_string(cin) +
                                        " channels, kernels expect " +
                                        std::to_string(kernels.extent(2)));
  }
  if (bias.rank() != 1 || bias.size() != cout) {
    fail(ErrorCode::kShapeMismatch, "conv2d bias must be [" + std::to_string(cout) + "]");
  }
  const std::size_t oh = conv_output_extent(h, kh, stride);
  const std::size_t ow = conv_output_extent(w, kw, stride);
  BasicTensor<T> out({oh, ow, cout});
  const auto xv = x.data();
  const auto kv = kernels.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      T* o = ov.data() + (i * ow + j) * cout;
      for (std::size_t co = 0; co < cout; ++co) o[co] = bias[co];
      for (std::size_t di = 0; di < kh; ++di) {
        for (std::size_t dj = 0; dj < kw; ++dj) {
          const T* xp = xv.data() + ((i * stride + di) * w + (j * stride + dj)) * cin;
          const T* kp = kv.data() + (di * kw + dj) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const T xval = xp[ci];
            const T* krow = kp + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) o[co] += xval * krow[co];
          }
        }
      }
    }
  }
  require_finite(out, "conv2d");
  return out;
}

template <typename T>
BasicTensor<T> mean_over_spatial(const BasicTensor<T>& x) {
  require_rank(x, 3, "mean_over_spatial");
  const std::size_t positions = x.extent(0) * x.extent(1), c = x.extent(2);
  std::vector<double> sums(c, 0.0);
  const auto xv = x.data();
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t k = 0; k < c; ++k) sums[k] += static_cast<double>(xv[p * c + k]);
  BasicTensor<T> out({c});
  for (std::size_t k = 0; k < c; ++k) out[k] = static_cast<T>(sums[k] / static_cast<double>(positions));
  require_finite(out, "mean_over_spatial");
  return out;
}

template <typename T>
BasicTensor<T> map_elementwise(const BasicTensor<T>& x, UnaryOp op) {
  BasicTensor<T> out = x;
  for (auto& v : out.data()) v = apply(op, v);
  require_finite(out, "map_elementwise");
  return out;
}

template <typename T>
BasicTensor<T> zip_elementwise(const BasicTensor<T>& a, const BasicTensor<T>& b, BinaryOp op) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kShapeMismatch, "zip_elementwise shapes differ: " +
                                        shape_to_string(a.shape()) + " vs " +
                                        shape_to_string(b.shape()));
  }
  BasicTensor<T> out = a;
  auto ov = out.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = apply(op, ov[i], bv[i]);
  require_finite(out, "zip_elementwise");
  return out;
}

#define GAPNET_INSTANTIATE_TENSOR(T)                                                          \
  template class BasicTensor<T>;                                                              \
  template bool bitwise_equal(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template void require_finite(const BasicTensor<T>&, const char*);                           \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);               \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                                   \
  template BasicTensor<T> conv1d_valid(const BasicTensor<T>&, const BasicTensor<T>&, T);      \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                 const BasicTensor<T>&, std::size_t);                         \
  template BasicTensor<T> mean_over_spatial(const BasicTensor<T>&);                           \
  template BasicTensor<T> map_elementwise(const BasicTensor<T>&, UnaryOp);                    \
  template BasicTensor<T> zip_elementwise(const BasicTensor<T>&, const BasicTensor<T>&, BinaryOp);

GAPNET_INSTANTIATE_TENSOR(float)
GAPNET_INSTANTIATE_TENSOR(double)

#undef GAPNET_INSTANTIATE_TENSOR

}  // namespace gapnet
