// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>

namespace gapnet::train {

inline constexpr double kProbabilityClamp = 1e-7;

template <typename T>
struct LossAndGrad {
  T loss;
  T grad;  // dL/dp
};

/// Binary cross-entropy -(y ln p + (1 - y) ln(1 - p)) with p clamped into
/// [1e-7, 1 - 1e-7] before the logarithms.
template <typename T>
LossAndGrad<T> bce_loss(T p, T y) {
  const T lo = static_cast<T>(kProbabilityClamp);
  const T pc = std::clamp(p, lo, T(1) - lo);
  const T loss = -(y * std::log(pc) + (T(1) - y) * std::log(T(1) - pc));
  const T grad = -y / pc + (T(1) - y) / (T(1) - pc);
  return {std::max(loss, T(0)), grad};
}

}  // namespace gapnet::train
