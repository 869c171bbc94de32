// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "gapnet/eval.hpp"
#include "test_util.hpp"

namespace gapnet::eval {
namespace {

using gapnet::testing::ExpectCode;

TEST(ConfusionTest, HandExample) {
  const int pred[] = {1, 0, 1, 1, 0, 0};
  const int label[] = {1, 0, 0, 1, 0, 1};
  EXPECT_EQ(confusion(pred, label), (ConfusionMatrix{2, 2, 1, 1}));
}

TEST(ConfusionTest, Errors) {
  const int one[] = {1};
  const int two[] = {1, 0};
  ExpectCode(ErrorCode::kLengthMismatch, [&] { confusion(one, two); });
  ExpectCode(ErrorCode::kEmptyInput, [] { confusion({}, {}); });
}

TEST(ConfusionTest, SwappingClassesSwapsCells) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<int> p(n), y(n), ps(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.below(2));
      y[i] = static_cast<int>(rng.below(2));
      ps[i] = 1 - p[i];
      ys[i] = 1 - y[i];
    }
    const auto a = confusion(p, y), b = confusion(ps, ys);
    EXPECT_EQ(a.total(), n);
    EXPECT_EQ(b, (ConfusionMatrix{a.tn, a.tp, a.fn, a.fp}));
    EXPECT_EQ(metrics(a).accuracy, metrics(b).accuracy);
  }
}

TEST(MetricsTest, HandExample) {
  const auto r = metrics({2, 3, 1, 0});
  EXPECT_NEAR(r.accuracy, 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(r.precision, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_NEAR(r.f1, 0.8, 1e-15);
  EXPECT_FALSE(r.precision_undefined || r.recall_undefined || r.f1_undefined);
}

TEST(MetricsTest, UndefinedRatiosAreFlagged) {
  const auto no_positive_calls = metrics({0, 5, 0, 3});
  EXPECT_TRUE(no_positive_calls.precision_undefined);
  EXPECT_FALSE(no_positive_calls.recall_undefined);
  EXPECT_EQ(no_positive_calls.recall, 0.0);
  EXPECT_TRUE(no_positive_calls.f1_undefined);

  const auto no_positives = metrics({0, 4, 2, 0});
  EXPECT_TRUE(no_positives.recall_undefined);
  EXPECT_EQ(no_positives.precision, 0.0);
  EXPECT_EQ(no_positives.accuracy, 4.0 / 6.0);

  ExpectCode(ErrorCode::kEmptyMatrix, [] { metrics({}); });
}

TEST(MetricsTest, JsonRoundTrip) {
  auto r = metrics({7, 9, 2, 1});
  r.model = "FCNN";
  r.seed = 42;
  r.config_fingerprint = "abcd";
  r.test_ms_per_image = 1.25;
  const auto back = metrics_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(to_json(back), to_json(r));
  ExpectCode(ErrorCode::kParseError, [] { metrics_from_json(nlohmann::json::object()); });
}

TEST(ArtifactTest, ConfusionCsv) {
  EXPECT_EQ(confusion_csv({1, 1, 0, 0}), "1,0\n0,1");
  EXPECT_EQ(confusion_csv({5, 6, 7, 8}), "5,8\n7,6");
}

TEST(ArtifactTest, SvgIsByteStable) {
  const ConfusionMatrix cm{12, 30, 4, 1};
  const std::string a = confusion_svg(cm);
  EXPECT_EQ(a, confusion_svg(cm));
  EXPECT_NE(a, confusion_svg({12, 30, 4, 2}));
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find(">30<"), std::string::npos);
  EXPECT_NE(a.find("92.3%"), std::string::npos);  // 12 / 13 of actual tumors
  EXPECT_NO_THROW(confusion_svg({}));
}

TEST(TimingTest, MsPerItem) {
  EXPECT_DOUBLE_EQ(ms_per_item(1.9, 100), 19.0);
  ExpectCode(ErrorCode::kEmptyInput, [] { ms_per_item(1.0, 0); });
}

TEST(TableTest, Headers) {
  MetricsReport a = metrics({1, 1, 0, 0});
  a.model = "DFN";
  a.seconds_per_epoch = 2.5;
  const MetricsReport rows[] = {a};
  EXPECT_EQ(comparison_table(rows),
            "Model,Accuracy (%),Precision (%),Recall (%),F1-Score (%)\nDFN,100.00,100.00,100.00,100.00\n");
  EXPECT_EQ(timing_table(rows), "Model,Accuracy (%),Time/Epoch (s),Test Time/Image (ms)\nDFN,100.00,2.500,0.000\n");
}

}  // namespace
}  // namespace gapnet::eval
