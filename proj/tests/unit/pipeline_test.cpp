// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "gapnet/pipeline.hpp"
#include "test_util.hpp"

namespace gapnet::pipeline {
namespace {

using gapnet::testing::ExpectCode;
using gapnet::testing::TempDir;

Tensor Random(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

ModelSpec Toy(ModelSpec spec) {
  spec.backbone = BackboneKind::kToyCnn;
  spec.head_input_channels = 16;
  return spec;
}

void ZeroAll(Model& m) {
  for (auto& [name, p] : m.named_parameters()) p->value.fill(0.0f);
}

std::vector<std::string_view> Kinds(const nn::Sequential<float>& s) {
  std::vector<std::string_view> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back(s[i].kind());
  return out;
}

TEST(FeatureHeadTest, AlgorithmOneShapes) {
  Rng rng(1);
  auto head = build_feature_head(ModelSpec::dfn(), rng);
  EXPECT_EQ(head.forward(Tensor({7, 7, 2048}), nn::Mode::kEval).shape(), (Shape{512}));
  EXPECT_EQ(head.parameter_count(), 1049088u);
}

TEST(FeatureHeadTest, ToyChannelsAnySpatialExtent) {
  Rng rng(2);
  auto head = build_feature_head(Toy(ModelSpec::dfn()), rng);
  EXPECT_EQ(head.forward(Tensor({56, 56, 16}), nn::Mode::kEval).shape(), (Shape{512}));
  for (std::size_t h = 1; h <= 14; ++h) {
    for (std::size_t w = 1; w <= 14; ++w) {
      EXPECT_EQ(head.forward(Random({h, w, 16}, rng), nn::Mode::kEval).size(), 512u);
    }
  }
}

TEST(SpecTest, InvalidSpecs) {
  Rng rng(3);
  auto zero_proj = ModelSpec::dfn();
  zero_proj.projection_dim = 0;
  ExpectCode(ErrorCode::kSpecInvalid, [&] { build_feature_head(zero_proj, rng); });

  auto no_hidden = ModelSpec::dfn();
  no_hidden.classifier.hidden.clear();
  no_hidden.classifier.dropout.clear();
  ExpectCode(ErrorCode::kSpecInvalid, [&] { build_classifier(no_hidden, rng); });

  auto no_filters = ModelSpec::cnn1d();
  no_filters.classifier.filters.clear();
  no_filters.classifier.kernel_sizes.clear();
  ExpectCode(ErrorCode::kSpecInvalid, [&] { build_classifier(no_filters, rng); });

  auto bad_rate = ModelSpec::dfn();
  bad_rate.classifier.dropout[0] = 1.0;
  ExpectCode(ErrorCode::kSpecInvalid, [&] { validate(bad_rate); });

  auto fcnn_with_dropout = ModelSpec::fcnn();
  fcnn_with_dropout.classifier.dropout = {0.5, 0.3};
  ExpectCode(ErrorCode::kSpecInvalid, [&] { validate(fcnn_with_dropout); });

  auto trainable_import = ModelSpec::dfn();
  trainable_import.backbone_trainable = true;
  ExpectCode(ErrorCode::kSpecInvalid, [&] { validate(trainable_import); });

  auto long_kernel = ModelSpec::cnn1d();
  long_kernel.projection_dim = 2;
  ExpectCode(ErrorCode::kSpecInvalid, [&] { validate(long_kernel); });
}

TEST(ClassifierTest, DfnDefault) {
  Rng rng(4);
  auto c = build_classifier(ModelSpec::dfn(), rng);
  const std::vector<std::string_view> want{"dense", "relu", "dropout", "dense", "relu", "dropout", "dense"};
  EXPECT_EQ(Kinds(c), want);
  EXPECT_EQ(c.parameter_count(), 164353u);
  EXPECT_EQ(c.forward(Tensor({512}), nn::Mode::kEval).shape(), (Shape{1}));
}

TEST(ClassifierTest, FcnnDefault) {
  Rng rng(5);
  auto c = build_classifier(ModelSpec::fcnn(), rng);
  const std::vector<std::string_view> want{"dense", "relu", "dense", "relu", "dense"};
  EXPECT_EQ(Kinds(c), want);
  EXPECT_EQ(c.parameter_count(), 164353u);
}

TEST(ClassifierTest, Cnn1dDefault) {
  Rng rng(6);
  auto c = build_classifier(ModelSpec::cnn1d(), rng);
  const std::vector<std::string_view> want{"conv1d", "relu", "flatten", "dense"};
  EXPECT_EQ(Kinds(c), want);
  auto* dense = dynamic_cast<nn::DenseLayer<float>*>(&c[3]);
  ASSERT_NE(dense, nullptr);
  EXPECT_EQ(dense->in_features(), 4080u);
  EXPECT_EQ(dense->weight().value.size() + dense->bias().value.size(), 4081u);
  EXPECT_EQ(c.parameter_count(), 4081u + 8 * 3 + 8);
}

TEST(ModelTest, ParameterCountsByBackbone) {
  Model imported(ModelSpec::dfn(), 1);
  EXPECT_EQ(imported.parameter_count(), 1049088u + 164353u);
  EXPECT_EQ(imported.trainable_parameters().size(), imported.named_parameters().size());

  Model toy(Toy(ModelSpec::dfn()), 1);
  const std::size_t backbone = (5 * 5 * 3 * 8 + 8) + (5 * 5 * 8 * 16 + 16);
  EXPECT_EQ(toy.parameter_count(), backbone + 16 * 512 + 512 + 164353u);
  for (auto& [name, p] : toy.trainable_parameters()) EXPECT_NE(name.rfind("backbone.", 0), 0u) << name;
}

TEST(ModelTest, ZeroModelPredictsHalf) {
  Model m(ModelSpec::dfn(), 7);
  ZeroAll(m);
  Rng rng(8);
  const auto pred = m.predict(Random({7, 7, 2048}, rng));
  EXPECT_EQ(pred.p, 0.5f);
  EXPECT_EQ(pred.y, 0);
}

TEST(ModelTest, HandBuiltLogitGivesThreeQuarters) {
  Model m(ModelSpec::fcnn(), 7);
  ZeroAll(m);
  auto params = m.named_parameters();
  ASSERT_EQ(params.back().first, "classifier.4.b");
  params.back().second->value[0] = std::log(3.0f);
  Rng rng(9);
  EXPECT_NEAR(m.forward(Random({7, 7, 2048}, rng), nn::Mode::kEval), 0.75f, 1e-7);
}

TEST(ModelTest, EvalForwardIsPure) {
  Model m(ModelSpec::dfn(), 11);
  Rng rng(12);
  const Tensor x = Random({7, 7, 2048}, rng);
  const float first = m.forward(x, nn::Mode::kEval);
  for (int i = 0; i < 100; ++i) {
    const float again = m.forward(x, nn::Mode::kEval);
    EXPECT_EQ(std::memcmp(&first, &again, sizeof first), 0);
  }
}

TEST(ModelTest, InputShapeChecked) {
  Model m(ModelSpec::dfn(), 1);
  ExpectCode(ErrorCode::kShapeMismatch, [&] { m.forward(Tensor({7, 7, 16}), nn::Mode::kEval); });
  Model toy(Toy(ModelSpec::cnn1d()), 1);
  ExpectCode(ErrorCode::kShapeMismatch, [&] { toy.forward(Tensor({32, 32, 1}), nn::Mode::kEval); });
  EXPECT_GT(toy.forward(Tensor({32, 32, 3}), nn::Mode::kEval), 0.0f);
}

TEST(ModelTest, SameSeedSameWeights) {
  Model a(ModelSpec::cnn1d(), 5), b(ModelSpec::cnn1d(), 5), c(ModelSpec::cnn1d(), 6);
  EXPECT_EQ(a.snapshot(), b.snapshot());
  EXPECT_NE(a.snapshot(), c.snapshot());
}

TEST(ModelTest, SnapshotRestore) {
  Model m(ModelSpec::fcnn(), 3);
  const auto saved = m.snapshot();
  ZeroAll(m);
  m.restore(saved);
  EXPECT_EQ(m.snapshot(), saved);
}

TEST(DecideTest, StrictThreshold) {
  EXPECT_EQ(decide(0.7), 1);
  EXPECT_EQ(decide(0.5), 0);
  EXPECT_EQ(decide(0.2), 0);
  const double below = std::nextafter(0.5, 0.0), above = std::nextafter(0.5, 1.0);
  EXPECT_EQ(decide(0.0), 0);
  EXPECT_EQ(decide(below), 0);
  EXPECT_EQ(decide(above), 1);
  EXPECT_EQ(decide(1.0), 1);
}

TEST(DecideTest, SignOfLogit) {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const double z = rng.uniform(-30.0, 30.0);
    EXPECT_EQ(decide(1.0 / (1.0 + std::exp(-z)), 0.5), z > 0 ? 1 : 0) << z;
  }
}

TEST(SpecJsonTest, RoundTripAndFingerprint) {
  for (auto spec : {ModelSpec::dfn(), ModelSpec::fcnn(), Toy(ModelSpec::cnn1d())}) {
    const ModelSpec back = model_spec_from_json(to_json(spec));
    EXPECT_EQ(to_json(back), to_json(spec));
    EXPECT_EQ(fingerprint(back), fingerprint(spec));
  }
  auto wider = ModelSpec::dfn();
  wider.classifier.hidden[0] = 257;
  EXPECT_NE(fingerprint(wider), fingerprint(ModelSpec::dfn()));
  EXPECT_EQ(fingerprint(ModelSpec::dfn()).size(), 16u);
}

TEST(SpecJsonTest, Rejects) {
  auto j = to_json(ModelSpec::dfn());
  j["classifier"]["kind"] = "transformer";
  ExpectCode(ErrorCode::kSpecInvalid, [&] { model_spec_from_json(j); });
}

TEST(CheckpointTest, RoundTrip) {
  TempDir dir;
  Model m(Toy(ModelSpec::cnn1d()), 21);
  save_checkpoint(m, dir.path());
  Model back = load_checkpoint(dir.path(), m.spec());
  EXPECT_EQ(back.snapshot(), m.snapshot());
  EXPECT_EQ(fingerprint(checkpoint_spec(dir.path())), fingerprint(m.spec()));
  Rng rng(22);
  const Tensor x = Random({24, 24, 3}, rng);
  EXPECT_EQ(back.forward(x, nn::Mode::kEval), m.forward(x, nn::Mode::kEval));
}

TEST(CheckpointTest, DifferentSpecRejected) {
  TempDir dir;
  Model m(ModelSpec::fcnn(), 21);
  save_checkpoint(m, dir.path());
  ExpectCode(ErrorCode::kCheckpointMismatch, [&] { load_checkpoint(dir.path(), ModelSpec::dfn()); });
  ExpectCode(ErrorCode::kMissingResource,
             [&] { load_checkpoint(dir.path() / "nope", ModelSpec::fcnn()); });
}

}  // namespace
}  // namespace gapnet::pipeline
