// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapnet/backbone.hpp"
#include "gapnet/nn.hpp"

namespace gapnet::pipeline {

enum class BackboneKind { kImportedFeatures, kToyCnn };
enum class ClassifierKind { kDfn, kFcnn, kCnn1d };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::kDfn;
  /// Dense widths for DFN/FCNN.
  std::vector<std::size_t> hidden{256, 128};
  /// One rate per hidden layer, DFN only.
  std::vector<double> dropout{0.5, 0.3};
  /// CNN1D conv stack; filters[i] with kernel_sizes[i].
  std::vector<std::size_t> filters{8};
  std::vector<std::size_t> kernel_sizes{3};
};

struct ModelSpec {
  std::string name = "DFN";
  BackboneKind backbone = BackboneKind::kImportedFeatures;
  bool backbone_trainable = false;
  std::size_t head_input_channels = 2048;
  std::size_t projection_dim = 512;
  ClassifierSpec classifier;
  double decision_threshold = 0.5;

  static ModelSpec dfn();
  static ModelSpec fcnn();
  static ModelSpec cnn1d();
};

/// Throws SpecInvalid describing the first violated constraint.
void validate(const ModelSpec& spec);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

/// 16 hex digits of FNV-1a over the canonical JSON encoding of the spec.
std::string fingerprint(const ModelSpec& spec);

/// GAP -> Dense(projection_dim), no activation.
nn::Sequential<float> build_feature_head(const ModelSpec& spec, Rng& rng);

/// Layers ending in a single logit unit (the sigmoid is applied by Model).
///   DFN:   [Dense(w) + ReLU + Dropout(r)]* -> Dense(1)
///   FCNN:  [Dense(w) + ReLU]*              -> Dense(1)
///   CNN1D: [Conv1d(f, K) + ReLU]* -> Flatten -> Dense(1)
nn::Sequential<float> build_classifier(const ModelSpec& spec, Rng& rng);

struct Prediction {
  float p;
  int y;
};

/// Strict threshold rule: 1 iff p > threshold.
int decide(double p, double threshold = 0.5);

using NamedParameter = std::pair<std::string, nn::Parameter<float>*>;

/// Backbone (toy only) -> feature head -> classifier -> sigmoid.
class Model {
 public:
  Model(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  bool has_backbone() const { return backbone_.has_value(); }
  bool backbone_trainable() const { return has_backbone() && spec_.backbone_trainable; }
  nn::Sequential<float>& feature_head() { return head_; }
  nn::Sequential<float>& classifier() { return classifier_; }
  nn::Sequential<float>* backbone() { return backbone_ ? &*backbone_ : nullptr; }

  /// Input the model expects: [H x W x 3] for the toy backbone, a feature
  /// map [H x W x C] for imported features.
  void check_input(const Tensor& x) const;

  /// Backbone output in eval mode; identity (after shape check) for imported features.
  Tensor features(const Tensor& input);

  /// Probability from a backbone feature map.
  float forward_features(const Tensor& feature_map, nn::Mode mode);
  /// Probability from a raw model input (runs the backbone).
  float forward(const Tensor& input, nn::Mode mode);
  /// The projected feature vector F_proj for one input (eval mode).
  Tensor extract(const Tensor& input);

  /// Backpropagates dL/dp through every trainable stage of the last
  /// training-mode forward.
  void backward(float dloss_dp);

  Prediction predict(const Tensor& input);

  std::vector<NamedParameter> named_parameters();
  std::vector<NamedParameter> trainable_parameters();
  std::size_t parameter_count() const;
  void zero_grad();

  std::vector<Tensor> snapshot();
  void restore(const std::vector<Tensor>& values);

 private:
  ModelSpec spec_;
  std::optional<nn::Sequential<float>> backbone_;
  nn::Sequential<float> head_;
  nn::Sequential<float> classifier_;
  nn::SigmoidLayer<float> output_;
  bool backbone_in_graph_ = false;
};

/// Writes `model.json` (spec, fingerprint, parameter index) plus one
/// TensorFile per parameter into `directory`.
void save_checkpoint(Model& model, const std::filesystem::path& directory);

/// Rebuilds a model from `directory`; CheckpointMismatch if the stored spec
/// fingerprint differs from `expected`'s.
Model load_checkpoint(const std::filesystem::path& directory, const ModelSpec& expected);

/// Reads only the spec stored in a checkpoint.
ModelSpec checkpoint_spec(const std::filesystem::path& directory);

}  // namespace gapnet::pipeline
