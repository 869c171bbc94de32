// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gapnet/nn.hpp"

namespace gapnet::nn {

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-3;
  /// Second acceptance band, per entry: |a - n| <= max(rel * |n|, abs).
  double relative_tolerance = 1e-3;
  double absolute_tolerance = 1e-4;
  /// When set, the scalar objective is BCE of the single fragment output
  /// against this label. Otherwise it is <r, output> for a seeded random r.
  std::optional<double> bce_label;
  std::uint64_t seed = 0;
  /// Caps the entries probed per tensor (0 = all); probed entries are chosen
  /// by a seeded draw so large conv kernels stay cheap to check.
  std::size_t max_entries_per_tensor = 0;
};

struct TensorCheck {
  std::string name;
  std::size_t entries_checked = 0;
  double max_error = 0.0;
  /// Worst |a - n| / max(rel * |n|, abs); <= 1 means inside the band.
  double max_band_ratio = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;  // parameters in order, then "input"
  double max_error = 0.0;
  double max_band_ratio = 0.0;
  bool passed = false;          // max_error < tolerance
  bool within_band = false;     // max_band_ratio <= 1
};

/// Mixed error |a - n| / max(1, |n|).
double mixed_error(double analytic, double numeric);

/// Compares the fragment's analytic gradients (float path) with 64-bit
/// central differences of the same fragment re-evaluated in double.
///
/// The fragment is run in kTrain mode, so any dropout must have a fixed mask;
/// two forwards that disagree bitwise raise NonDeterministicFragment.
/// Parameter gradients are zeroed before and left holding the analytic
/// gradient afterwards.
GradCheckReport gradient_check(Sequential<float>& fragment, const Tensor& input,
                               const GradCheckOptions& options = {});

}  // namespace gapnet::nn
