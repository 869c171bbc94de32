// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "gapnet/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

namespace gapnet::eval {

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    fail(ErrorCode::kLengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                         std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) fail(ErrorCode::kEmptyInput, "no predictions to score");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == 1, actual = labels[i] == 1;
    if (pred && actual) ++cm.tp;
    else if (!pred && !actual) ++cm.tn;
    else if (pred) ++cm.fp;
    else ++cm.fn;
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  const std::uint64_t n = cm.total();
  if (n == 0) fail(ErrorCode::kEmptyMatrix, "confusion matrix is empty");
  MetricsReport r;
  r.confusion = cm;
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(n);
  if (cm.tp + cm.fp == 0) {
    r.precision_undefined = true;
  } else {
    r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn == 0) {
    r.recall_undefined = true;
  } else {
    r.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  }
  if (r.precision + r.recall == 0.0) {
    r.f1_undefined = true;
  } else {
    r.f1 = 2.0 * (r.precision * r.recall) / (r.precision + r.recall);
  }
  return r;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["precision_undefined"] = r.precision_undefined;
  j["recall_undefined"] = r.recall_undefined;
  j["f1_undefined"] = r.f1_undefined;
  j["tp"] = r.confusion.tp;
  j["tn"] = r.confusion.tn;
  j["fp"] = r.confusion.fp;
  j["fn"] = r.confusion.fn;
  j["seconds_per_epoch"] = r.seconds_per_epoch;
  j["test_ms_per_image"] = r.test_ms_per_image;
  j["config_fingerprint"] = r.config_fingerprint;
  j["seed"] = r.seed;
  return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.model = j.at("model").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.precision_undefined = j.value("precision_undefined", false);
    r.recall_undefined = j.value("recall_undefined", false);
    r.f1_undefined = j.value("f1_undefined", false);
    r.confusion = {j.at("tp").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>(),
                   j.at("fp").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>()};
    r.seconds_per_epoch = j.value("seconds_per_epoch", 0.0);
    r.test_ms_per_image = j.value("test_ms_per_image", 0.0);
    r.config_fingerprint = j.value("config_fingerprint", std::string());
    r.seed = j.value("seed", std::uint64_t{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, std::string("metrics report: ") + e.what());
  }
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  return std::to_string(cm.tp) + "," + std::to_string(cm.fn) + "\n" + std::to_string(cm.fp) + "," +
         std::to_string(cm.tn);
}

namespace {

std::string percent(std::uint64_t part, std::uint64_t whole) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole));
  return buf;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

std::string confusion_svg(const ConfusionMatrix& cm, const std::string& title) {
  const std::uint64_t cells[2][2] = {{cm.tp, cm.fn}, {cm.fp, cm.tn}};
  const std::uint64_t rows[2] = {cm.tp + cm.fn, cm.fp + cm.tn};
  const char* names[2] = {"Tumor", "Non-tumor"};
  std::uint64_t peak = 1;
  for (const auto& row : cells)
    for (auto v : row) peak = std::max(peak, v);

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"360\" height=\"320\" "
       "font-family=\"sans-serif\" font-size=\"13\">\n";
  s += "<text x=\"180\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + title + "</text>\n";
  s += "<text x=\"210\" y=\"50\" text-anchor=\"middle\">Predicted</text>\n";
  s += "<text x=\"20\" y=\"185\" text-anchor=\"middle\" transform=\"rotate(-90 20 185)\">Actual</text>\n";
  for (int c = 0; c < 2; ++c) {
    s += "<text x=\"" + std::to_string(150 + 120 * c) + "\" y=\"72\" text-anchor=\"middle\">" +
         names[c] + "</text>\n";
  }
  for (int r = 0; r < 2; ++r) {
    const int y = 80 + 110 * r;
    s += "<text x=\"85\" y=\"" + std::to_string(y + 60) + "\" text-anchor=\"end\">" + names[r] + "</text>\n";
    for (int c = 0; c < 2; ++c) {
      const int x = 90 + 120 * c;
      const double shade = static_cast<double>(cells[r][c]) / static_cast<double>(peak);
      const int level = 255 - static_cast<int>(shade * 155.0);
      char fill[16];
      std::snprintf(fill, sizeof fill, "#%02x%02xff", level, level);
      s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
           "\" width=\"120\" height=\"110\" fill=\"" + fill + "\" stroke=\"#333\"/>\n";
      s += "<text x=\"" + std::to_string(x + 60) + "\" y=\"" + std::to_string(y + 52) +
           "\" text-anchor=\"middle\" font-size=\"18\">" + std::to_string(cells[r][c]) + "</text>\n";
      s += "<text x=\"" + std::to_string(x + 60) + "\" y=\"" + std::to_string(y + 74) +
           "\" text-anchor=\"middle\">" + percent(cells[r][c], rows[r]) + "</text>\n";
    }
  }
  s += "</svg>\n";
  return s;
}

double ms_per_item(double total_seconds, std::size_t count) {
  if (count == 0) fail(ErrorCode::kEmptyInput, "no items were timed");
  return total_seconds * 1000.0 / static_cast<double>(count);
}

double measure_inference(pipeline::Model& model, std::span<const Tensor> inputs) {
  if (inputs.empty()) fail(ErrorCode::kEmptyInput, "no samples to time");
  const auto start = std::chrono::steady_clock::now();
  for (const auto& x : inputs) (void)model.predict(x);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  return ms_per_item(elapsed.count(), inputs.size());
}

std::string comparison_table(std::span<const MetricsReport> reports) {
  std::string out = "Model,Accuracy (%),Precision (%),Recall (%),F1-Score (%)\n";
  for (const auto& r : reports) {
    out += r.model + "," + fmt("%.2f", 100.0 * r.accuracy) + "," + fmt("%.2f", 100.0 * r.precision) +
           "," + fmt("%.2f", 100.0 * r.recall) + "," + fmt("%.2f", 100.0 * r.f1) + "\n";
  }
  return out;
}

std::string timing_table(std::span<const MetricsReport> reports) {
  std::string out = "Model,Accuracy (%),Time/Epoch (s),Test Time/Image (ms)\n";
  for (const auto& r : reports) {
    out += r.model + "," + fmt("%.2f", 100.0 * r.accuracy) + "," + fmt("%.3f", r.seconds_per_epoch) +
           "," + fmt("%.3f", r.test_ms_per_image) + "\n";
  }
  return out;
}

}  // namespace gapnet::eval
