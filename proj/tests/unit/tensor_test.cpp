// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gapnet/rng.hpp"
#include "gapnet/tensor.hpp"
#include "test_util.hpp"

namespace gapnet {
namespace {

using testing::ExpectCode;

Tensor Random(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

TEST(TensorTest, ConstructionEnforcesShapeContract) {
  ExpectCode(ErrorCode::kRankError, [] { Tensor(Shape{}); });
  ExpectCode(ErrorCode::kShapeMismatch, [] { Tensor(Shape{2, 0}); });
  ExpectCode(ErrorCode::kShapeMismatch, [] { Tensor(Shape{2, 2}, {1, 2, 3}); });
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_TRUE(std::all_of(t.data().begin(), t.data().end(), [](float v) { return v == 0.0f; }));
}

TEST(TensorTest, MatmulByIdentity) {
  const auto a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const auto eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(matmul(a, eye), a);
}

TEST(TensorTest, MatmulHandArithmetic) {
  const auto a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const auto b = Tensor::matrix(2, 1, {5, 6});
  EXPECT_EQ(matmul(a, b), Tensor::matrix(2, 1, {17, 39}));
}

TEST(TensorTest, MatmulInnerExtentMismatch) {
  ExpectCode(ErrorCode::kShapeMismatch, [] { matmul(Tensor({2, 3}), Tensor({2, 3})); });
}

TEST(TensorTest, MatmulIdentityIsBitwiseForRandomMatrices) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(8);
    const Tensor a = Random({m, k}, rng, -1e3, 1e3);
    Tensor eye({k, k});
    for (std::size_t i = 0; i < k; ++i) eye.at(i, i) = 1.0f;
    EXPECT_TRUE(bitwise_equal(matmul(a, eye), a));
  }
}

TEST(TensorTest, Transpose) {
  const auto a = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(transpose(a), Tensor::matrix(3, 2, {1, 4, 2, 5, 3, 6}));
  ExpectCode(ErrorCode::kRankError, [] { transpose(Tensor({3})); });
}

TEST(TensorTest, Conv1dHandExamples) {
  EXPECT_EQ(conv1d_valid(Tensor::vector({1, 2, 3, 4}), Tensor::vector({1, 0, -1}), 0.0f),
            Tensor::vector({-2, -2}));
  EXPECT_EQ(conv1d_valid(Tensor::vector({5, 5, 5}), Tensor::vector({1, 1}), 1.0f),
            Tensor::vector({11, 11}));
}

TEST(TensorTest, Conv1dUnitKernelIsIdentity) {
  Rng rng(3);
  const Tensor x = Random({17}, rng);
  EXPECT_TRUE(bitwise_equal(conv1d_valid(x, Tensor::vector({1}), 0.0f), x));
}

TEST(TensorTest, Conv1dKernelTooLong) {
  ExpectCode(ErrorCode::kKernelTooLong,
             [] { conv1d_valid(Tensor::vector({1, 2}), Tensor::vector({1, 1, 1}), 0.0f); });
}

TEST(TensorTest, Conv1dDeltaKernelShiftsInput) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t K = 1 + rng.below(5);
    const std::size_t n = K + rng.below(20);
    const Tensor x = Random({n}, rng);
    for (std::size_t tap = 0; tap < K; ++tap) {
      Tensor kernel({K});
      kernel[tap] = 1.0f;
      const Tensor out = conv1d_valid(x, kernel, 0.0f);
      ASSERT_EQ(out.size(), n - K + 1);
      for (std::size_t t = 0; t < out.size(); ++t) EXPECT_EQ(out[t], x[t + tap]);
    }
  }
}

TEST(TensorTest, Conv1dOutputLength) {
  for (std::size_t n = 1; n <= 12; ++n) {
    for (std::size_t K = 1; K <= n; ++K) {
      EXPECT_EQ(conv1d_valid(Tensor({n}), Tensor({K}), 0.0f).size(), n - K + 1);
    }
  }
}

TEST(TensorTest, Conv2dOnesKernel) {
  const Tensor x = Tensor::full({3, 3, 1}, 1.0f);
  const Tensor k = Tensor::full({2, 2, 1, 1}, 1.0f);
  EXPECT_EQ(conv2d(x, k, Tensor({1}), 1), Tensor::full({2, 2, 1}, 4.0f));
}

TEST(TensorTest, Conv2dIdentityKernels) {
  Rng rng(9);
  const std::size_t c = 4;
  const Tensor x = Random({5, 6, c}, rng);
  Tensor k({1, 1, c, c});
  for (std::size_t i = 0; i < c; ++i) k[i * c + i] = 1.0f;
  EXPECT_TRUE(bitwise_equal(conv2d(x, k, Tensor({c}), 1), x));
}

TEST(TensorTest, Conv2dStrideShape) {
  const Tensor out = conv2d(Tensor({4, 4, 1}), Tensor({2, 2, 1, 1}), Tensor({1}), 2);
  EXPECT_EQ(out.shape(), (Shape{2, 2, 1}));
}

TEST(TensorTest, Conv2dChannelMismatch) {
  ExpectCode(ErrorCode::kShapeMismatch,
             [] { conv2d(Tensor({4, 4, 2}), Tensor({2, 2, 3, 1}), Tensor({1}), 1); });
}

TEST(TensorTest, ConvOutputExtentFormula) {
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t k : {3u, 5u}) {
      for (std::size_t in = k; in < 40; ++in) {
        EXPECT_EQ(conv_output_extent(in, k, stride), (in - k) / stride + 1);
      }
    }
  }
  EXPECT_EQ(conv_output_extent(224, 5, 2), 110u);
  EXPECT_EQ(conv_output_extent(110, 5, 2), 53u);
}

TEST(TensorTest, MeanOverSpatialExamples) {
  EXPECT_EQ(mean_over_spatial(Tensor::full({7, 7, 2048}, 1.0f)), Tensor::full({2048}, 1.0f));

  Tensor ramp({7, 7, 1});
  std::iota(ramp.data().begin(), ramp.data().end(), 0.0f);
  EXPECT_EQ(mean_over_spatial(ramp), Tensor::vector({24.0f}));

  const Tensor v = Tensor({1, 1, 3}, {1.5f, -2.0f, 7.0f});
  EXPECT_EQ(mean_over_spatial(v), Tensor::vector({1.5f, -2.0f, 7.0f}));
  ExpectCode(ErrorCode::kRankError, [] { mean_over_spatial(Tensor({4, 4})); });
}

TEST(TensorTest, MeanOverSpatialIsPermutationInvariant) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 1 + rng.below(9), w = 1 + rng.below(9), c = 1 + rng.below(4);
    const Tensor x = Random({h, w, c}, rng, -10, 10);
    std::vector<std::size_t> perm(h * w);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    Tensor y({h, w, c});
    for (std::size_t pos = 0; pos < h * w; ++pos) {
      for (std::size_t ch = 0; ch < c; ++ch) y[perm[pos] * c + ch] = x[pos * c + ch];
    }
    const Tensor a = mean_over_spatial(x), b = mean_over_spatial(y);
    for (std::size_t ch = 0; ch < c; ++ch) EXPECT_NEAR(a[ch], b[ch], 1e-6);
  }
}

TEST(TensorTest, Elementwise) {
  EXPECT_EQ(map_elementwise(Tensor::vector({-1, 0, 2}), UnaryOp::kRelu), Tensor::vector({0, 0, 2}));
  Rng rng(1);
  const Tensor x = Random({3, 4}, rng);
  EXPECT_EQ(zip_elementwise(x, Tensor::zeros_like(x), BinaryOp::kAdd), x);
  ExpectCode(ErrorCode::kShapeMismatch, [] {
    zip_elementwise(Tensor::vector({1, 2}), Tensor::vector({3}), BinaryOp::kMul);
  });
}

TEST(TensorTest, KernelsRejectNonFiniteResults) {
  ExpectCode(ErrorCode::kNonFinite, [] {
    zip_elementwise(Tensor::vector({1}), Tensor::vector({0}), BinaryOp::kDiv);
  });
  ExpectCode(ErrorCode::kNonFinite, [] { map_elementwise(Tensor::vector({1000}), UnaryOp::kExp); });
}

TEST(TensorTest, SigmoidStaysInsideOpenInterval) {
  const Tensor x = Tensor::vector({-1e30f, -200.0f, 0.0f, 200.0f, 1e30f});
  const Tensor s = map_elementwise(x, UnaryOp::kSigmoid);
  for (float v : s.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_EQ(s[2], 0.5f);
}

TEST(TensorTest, BitwiseEqualDistinguishesSignedZero) {
  EXPECT_EQ(Tensor::vector({0.0f}), Tensor::vector({-0.0f}));
  EXPECT_FALSE(bitwise_equal(Tensor::vector({0.0f}), Tensor::vector({-0.0f})));
}

}  // namespace
}  // namespace gapnet
