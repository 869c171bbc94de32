// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapnet/pipeline.hpp"

namespace gapnet::eval {

/// Positive class is tumor (label 1).
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels);

struct MetricsReport {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  // Zero-denominator ratios are reported as 0 with the matching flag set.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
  ConfusionMatrix confusion;
  double seconds_per_epoch = 0;
  double test_ms_per_image = 0;
  std::string model;
  std::string config_fingerprint;
  std::uint64_t seed = 0;
};

/// accuracy = (TP+TN)/N, precision = TP/(TP+FP), recall = TP/(TP+FN),
/// F1 = 2PR/(P+R). Throws EmptyMatrix when N == 0.
MetricsReport metrics(const ConfusionMatrix& cm);

/// Flat JSON object: metric fields, tp/tn/fp/fn, timing, model, fingerprint, seed.
nlohmann::ordered_json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

/// Rows are actual (tumor first), columns predicted (tumor first): "TP,FN\nFP,TN".
std::string confusion_csv(const ConfusionMatrix& cm);
/// 2x2 grid with counts and row-normalised percentages; byte-stable per cm.
std::string confusion_svg(const ConfusionMatrix& cm, const std::string& title = "Confusion Matrix");

/// Total wall-clock / count, in milliseconds.
double ms_per_item(double total_seconds, std::size_t count);

/// Mean single-threaded eval-mode inference time per input, in milliseconds.
double measure_inference(pipeline::Model& model, std::span<const Tensor> inputs);

/// Comparison table with the columns Model, Accuracy, Precision, Recall, F1 (percent).
std::string comparison_table(std::span<const MetricsReport> reports);
/// Model, Accuracy, Time/Epoch (s), Test Time/Image (ms).
std::string timing_table(std::span<const MetricsReport> reports);

}  // namespace gapnet::eval
