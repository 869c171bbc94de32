// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "gapnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gapnet/loss.hpp"

namespace gapnet::nn {

double mixed_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

namespace {

double band_ratio(double analytic, double numeric, const GradCheckOptions& o) {
  return std::abs(analytic - numeric) /
         std::max(o.relative_tolerance * std::abs(numeric), o.absolute_tolerance);
}

struct Objective {
  std::optional<double> label;
  std::vector<double> weights;

  template <typename T>
  double value(const BasicTensor<T>& out) const {
    if (label) return train::bce_loss<double>(static_cast<double>(out[0]), *label).loss;
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += weights[i] * static_cast<double>(out[i]);
    return acc;
  }

  Tensor grad(const Tensor& out) const {
    Tensor g = Tensor::zeros_like(out);
    if (label) {
      g[0] = train::bce_loss<float>(out[0], static_cast<float>(*label)).grad;
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) g[i] = static_cast<float>(weights[i]);
    }
    return g;
  }
};

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (cap == 0 || cap >= n) return idx;
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport gradient_check(Sequential<float>& fragment, const Tensor& input,
                               const GradCheckOptions& options) {
  const Tensor first = fragment.forward(input, Mode::kTrain);
  const Tensor out = fragment.forward(input, Mode::kTrain);
  if (!bitwise_equal(first, out)) {
    fail(ErrorCode::kNonDeterministicFragment,
         "repeated training-mode forwards disagree; fix dropout masks before checking");
  }

  Objective objective;
  objective.label = options.bce_label;
  if (objective.label) {
    if (out.size() != 1) fail(ErrorCode::kShapeMismatch, "BCE objective needs a single output");
  } else {
    Rng rng(derive_seed(options.seed, 1));
    objective.weights.resize(out.size());
    for (auto& w : objective.weights) w = rng.uniform(-1.0, 1.0);
  }

  fragment.zero_grad();
  const Tensor input_grad = fragment.backward(objective.grad(out));

  Sequential<double> reference = fragment.clone_f64();
  Tensor64 x64 = input.cast<double>();
  const double h = options.step;
  auto loss_at = [&](const Tensor64& x) { return objective.value(reference.forward(x, Mode::kTrain)); };

  GradCheckReport report;
  Rng pick(derive_seed(options.seed, 2));

  auto named = fragment.named_parameters();
  auto named64 = reference.named_parameters();
  for (std::size_t p = 0; p < named.size(); ++p) {
    TensorCheck check{named[p].first};
    auto& value64 = named64[p].second->value;
    const auto& analytic = named[p].second->grad;
    for (std::size_t i : probe_indices(value64.size(), options.max_entries_per_tensor, pick)) {
      const double saved = value64[i];
      value64[i] = saved + h;
      const double up = loss_at(x64);
      value64[i] = saved - h;
      const double down = loss_at(x64);
      value64[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      check.max_error = std::max(check.max_error, mixed_error(analytic[i], numeric));
      check.max_band_ratio = std::max(check.max_band_ratio, band_ratio(analytic[i], numeric, options));
      ++check.entries_checked;
    }
    report.tensors.push_back(check);
  }

  TensorCheck input_check{"input"};
  for (std::size_t i : probe_indices(x64.size(), options.max_entries_per_tensor, pick)) {
    const double saved = x64[i];
    x64[i] = saved + h;
    const double up = loss_at(x64);
    x64[i] = saved - h;
    const double down = loss_at(x64);
    x64[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    input_check.max_error = std::max(input_check.max_error, mixed_error(input_grad[i], numeric));
    input_check.max_band_ratio =
        std::max(input_check.max_band_ratio, band_ratio(input_grad[i], numeric, options));
    ++input_check.entries_checked;
  }
  report.tensors.push_back(input_check);

  for (const auto& t : report.tensors) {
    report.max_error = std::max(report.max_error, t.max_error);
    report.max_band_ratio = std::max(report.max_band_ratio, t.max_band_ratio);
  }
  report.passed = report.max_error < options.tolerance;
  report.within_band = report.max_band_ratio <= 1.0;
  return report;
}

}  // namespace gapnet::nn
