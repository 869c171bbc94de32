// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "gapnet/pipeline.hpp"

#include <cstdio>
#include <fstream>

namespace gapnet::pipeline {

namespace {

const backbone::ToyBackboneConfig kToyConfig{};

[[noreturn]] void invalid(const std::string& what) { fail(ErrorCode::kSpecInvalid, what); }

std::string backbone_name(BackboneKind k) {
  return k == BackboneKind::kToyCnn ? "toy_cnn" : "imported_features";
}

std::string classifier_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::kDfn: return "dfn";
    case ClassifierKind::kFcnn: return "fcnn";
    case ClassifierKind::kCnn1d: return "cnn1d";
  }
  return "dfn";
}

ClassifierKind parse_classifier(const std::string& s) {
  if (s == "dfn") return ClassifierKind::kDfn;
  if (s == "fcnn") return ClassifierKind::kFcnn;
  if (s == "cnn1d") return ClassifierKind::kCnn1d;
  invalid("unknown classifier kind '" + s + "'");
}

BackboneKind parse_backbone(const std::string& s) {
  if (s == "imported_features") return BackboneKind::kImportedFeatures;
  if (s == "toy_cnn") return BackboneKind::kToyCnn;
  invalid("unknown backbone '" + s + "'");
}

}  // namespace

ModelSpec ModelSpec::dfn() { return ModelSpec{}; }

ModelSpec ModelSpec::fcnn() {
  ModelSpec s;
  s.name = "FCNN";
  s.classifier.kind = ClassifierKind::kFcnn;
  s.classifier.dropout.clear();
  return s;
}

ModelSpec ModelSpec::cnn1d() {
  ModelSpec s;
  s.name = "CNN-1D";
  s.classifier.kind = ClassifierKind::kCnn1d;
  s.classifier.hidden.clear();
  s.classifier.dropout.clear();
  return s;
}

void validate(const ModelSpec& spec) {
  if (spec.projection_dim < 1) invalid("projection_dim must be at least 1");
  if (spec.head_input_channels < 1) invalid("head_input_channels must be at least 1");
  if (!(spec.decision_threshold >= 0.0 && spec.decision_threshold <= 1.0)) {
    invalid("decision_threshold must lie in [0, 1]");
  }
  if (spec.backbone == BackboneKind::kImportedFeatures && spec.backbone_trainable) {
    invalid("imported feature backbones are frozen and cannot be trainable");
  }
  if (spec.backbone == BackboneKind::kToyCnn && spec.head_input_channels != kToyConfig.out_channels) {
    invalid("toy_cnn emits " + std::to_string(kToyConfig.out_channels) +
            " channels; head_input_channels is " + std::to_string(spec.head_input_channels));
  }
  const auto& c = spec.classifier;
  switch (c.kind) {
    case ClassifierKind::kDfn:
    case ClassifierKind::kFcnn: {
      if (c.hidden.empty()) invalid("classifier has no hidden layers");
      for (auto w : c.hidden) {
        if (w < 1) invalid("hidden widths must be at least 1");
      }
      if (c.kind == ClassifierKind::kDfn) {
        if (c.dropout.size() != c.hidden.size()) invalid("DFN needs one dropout rate per hidden layer");
        for (double r : c.dropout) {
          if (!(r >= 0.0 && r < 1.0)) invalid("dropout rates must lie in [0, 1)");
        }
      } else if (!c.dropout.empty()) {
        invalid("FCNN heads carry no dropout");
      }
      break;
    }
    case ClassifierKind::kCnn1d: {
      if (c.filters.empty()) invalid("classifier has no conv layers");
      if (c.filters.size() != c.kernel_sizes.size()) invalid("filters and kernel_sizes differ in length");
      std::size_t length = spec.projection_dim;
      for (std::size_t i = 0; i < c.filters.size(); ++i) {
        if (c.filters[i] < 1 || c.kernel_sizes[i] < 1) invalid("filters and kernel sizes must be at least 1");
        if (c.kernel_sizes[i] > length) invalid("conv kernel longer than its input signal");
        length = length - c.kernel_sizes[i] + 1;
      }
      break;
    }
  }
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json classifier{{"kind", classifier_name(spec.classifier.kind)}};
  switch (spec.classifier.kind) {
    case ClassifierKind::kDfn:
      classifier["hidden"] = spec.classifier.hidden;
      classifier["dropout"] = spec.classifier.dropout;
      break;
    case ClassifierKind::kFcnn:
      classifier["hidden"] = spec.classifier.hidden;
      break;
    case ClassifierKind::kCnn1d:
      classifier["filters"] = spec.classifier.filters;
      classifier["kernel_sizes"] = spec.classifier.kernel_sizes;
      break;
  }
  return {
      {"name", spec.name},
      {"backbone", backbone_name(spec.backbone)},
      {"backbone_trainable", spec.backbone_trainable},
      {"head_input_channels", spec.head_input_channels},
      {"projection_dim", spec.projection_dim},
      {"classifier", classifier},
      {"decision_threshold", spec.decision_threshold},
  };
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec spec;
    if (!j.is_object()) invalid("model spec must be an object");
    const auto kind = parse_classifier(j.at("classifier").value("kind", std::string("dfn")));
    if (kind == ClassifierKind::kFcnn) spec = ModelSpec::fcnn();
    if (kind == ClassifierKind::kCnn1d) spec = ModelSpec::cnn1d();
    spec.name = j.value("name", spec.name);
    spec.backbone = parse_backbone(j.value("backbone", backbone_name(spec.backbone)));
    spec.backbone_trainable = j.value("backbone_trainable", false);
    spec.head_input_channels = j.value("head_input_channels", spec.head_input_channels);
    spec.projection_dim = j.value("projection_dim", spec.projection_dim);
    spec.decision_threshold = j.value("decision_threshold", spec.decision_threshold);
    const auto& c = j.at("classifier");
    spec.classifier.hidden = c.value("hidden", spec.classifier.hidden);
    spec.classifier.dropout = c.value("dropout", spec.classifier.dropout);
    spec.classifier.filters = c.value("filters", spec.classifier.filters);
    spec.classifier.kernel_sizes = c.value("kernel_sizes", spec.classifier.kernel_sizes);
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("malformed model spec: ") + e.what());
  }
}

std::string fingerprint(const ModelSpec& spec) {
  const std::string canonical = to_json(spec).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nn::Sequential<float> build_feature_head(const ModelSpec& spec, Rng& rng) {
  validate(spec);
  nn::Sequential<float> head;
  head.emplace<nn::GapLayer<float>>();
  head.emplace<nn::DenseLayer<float>>(spec.head_input_channels, spec.projection_dim, rng);
  return head;
}

nn::Sequential<float> build_classifier(const ModelSpec& spec, Rng& rng) {
  validate(spec);
  const auto& c = spec.classifier;
  nn::Sequential<float> net;
  if (c.kind == ClassifierKind::kCnn1d) {
    std::size_t channels = 1, length = spec.projection_dim;
    for (std::size_t i = 0; i < c.filters.size(); ++i) {
      net.emplace<nn::Conv1dLayer<float>>(channels, c.filters[i], c.kernel_sizes[i], rng);
      net.emplace<nn::ReluLayer<float>>();
      channels = c.filters[i];
      length = length - c.kernel_sizes[i] + 1;
    }
    net.emplace<nn::FlattenLayer<float>>();
    net.emplace<nn::DenseLayer<float>>(channels * length, 1, rng);
    return net;
  }
  std::size_t width = spec.projection_dim;
  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    net.emplace<nn::DenseLayer<float>>(width, c.hidden[i], rng);
    net.emplace<nn::ReluLayer<float>>();
    if (c.kind == ClassifierKind::kDfn) net.emplace<nn::DropoutLayer<float>>(c.dropout[i], rng.next());
    width = c.hidden[i];
  }
  net.emplace<nn::DenseLayer<float>>(width, 1, rng);
  return net;
}

int decide(double p, double threshold) { return p > threshold ? 1 : 0; }

// ---------------------------------------------------------------- Model

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  validate(spec_);
  if (spec_.backbone == BackboneKind::kToyCnn) {
    Rng rng(derive_seed(seed, 10));
    backbone_ = backbone::make_toy_backbone(kToyConfig, rng);
  }
  Rng head_rng(derive_seed(seed, 11));
  head_ = build_feature_head(spec_, head_rng);
  Rng classifier_rng(derive_seed(seed, 12));
  classifier_ = build_classifier(spec_, classifier_rng);
}

void Model::check_input(const Tensor& x) const {
  if (x.rank() != 3) {
    fail(ErrorCode::kShapeMismatch, "model input must be [H x W x C], got " + shape_to_string(x.shape()));
  }
  const std::size_t want = backbone_ ? kToyConfig.in_channels : spec_.head_input_channels;
  if (x.extent(2) != want) {
    fail(ErrorCode::kShapeMismatch, "model input has " + std::to_string(x.extent(2)) +
                                        " channels, expected " + std::to_string(want));
  }
}

Tensor Model::features(const Tensor& input) {
  check_input(input);
  if (!backbone_) return input;
  return backbone::toy_backbone_forward(*backbone_, input, nn::Mode::kEval);
}

float Model::forward_features(const Tensor& feature_map, nn::Mode mode) {
  if (feature_map.rank() != 3 || feature_map.extent(2) != spec_.head_input_channels) {
    fail(ErrorCode::kShapeMismatch, "feature map " + shape_to_string(feature_map.shape()) +
                                        " does not have " + std::to_string(spec_.head_input_channels) +
                                        " channels");
  }
  backbone_in_graph_ = false;
  const Tensor projected = head_.forward(feature_map, mode);
  const Tensor logit = classifier_.forward(projected, mode);
  return output_.forward(logit, mode)[0];
}

float Model::forward(const Tensor& input, nn::Mode mode) {
  check_input(input);
  if (!backbone_) return forward_features(input, mode);
  const bool through = mode == nn::Mode::kTrain && spec_.backbone_trainable;
  const Tensor fmap = backbone_->forward(input, through ? nn::Mode::kTrain : nn::Mode::kEval);
  const float p = forward_features(fmap, mode);
  backbone_in_graph_ = through;
  return p;
}

Tensor Model::extract(const Tensor& input) { return head_.forward(features(input), nn::Mode::kEval); }

void Model::backward(float dloss_dp) {
  Tensor g = output_.backward(Tensor::vector({dloss_dp}));
  g = classifier_.backward(g);
  g = head_.backward(g);
  if (backbone_in_graph_) {
    backbone_->backward(g);
    backbone_in_graph_ = false;
  }
}

Prediction Model::predict(const Tensor& input) {
  const float p = forward(input, nn::Mode::kEval);
  return {p, decide(p, spec_.decision_threshold)};
}

std::vector<NamedParameter> Model::named_parameters() {
  std::vector<NamedParameter> out;
  auto add = [&out](nn::Sequential<float>& seq, const std::string& prefix) {
    for (auto& [name, p] : seq.named_parameters()) out.emplace_back(prefix + name, p);
  };
  if (backbone_) add(*backbone_, "backbone.");
  add(head_, "head.");
  add(classifier_, "classifier.");
  return out;
}

std::vector<NamedParameter> Model::trainable_parameters() {
  auto all = named_parameters();
  if (backbone_ && !spec_.backbone_trainable) {
    std::erase_if(all, [](const NamedParameter& p) { return p.first.starts_with("backbone."); });
  }
  return all;
}

std::size_t Model::parameter_count() const {
  std::size_t n = head_.parameter_count() + classifier_.parameter_count();
  if (backbone_) n += backbone_->parameter_count();
  return n;
}

void Model::zero_grad() {
  if (backbone_) backbone_->zero_grad();
  head_.zero_grad();
  classifier_.zero_grad();
}

std::vector<Tensor> Model::snapshot() {
  std::vector<Tensor> values;
  for (auto& [name, p] : named_parameters()) values.push_back(p->value);
  return values;
}

void Model::restore(const std::vector<Tensor>& values) {
  auto params = named_parameters();
  if (values.size() != params.size()) fail(ErrorCode::kShapeMismatch, "snapshot parameter count differs");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].shape() != params[i].second->value.shape()) {
      fail(ErrorCode::kShapeMismatch, "snapshot shape differs for " + params[i].first);
    }
    params[i].second->value = values[i];
  }
}

// ---------------------------------------------------------------- Checkpoints

namespace {

nlohmann::json read_index(const std::filesystem::path& directory) {
  const auto path = directory / "model.json";
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingResource, "checkpoint index " + path.string() + " not found");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

}  // namespace

void save_checkpoint(Model& model, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  nlohmann::json params = nlohmann::json::array();
  for (auto& [name, p] : model.named_parameters()) {
    const std::string file = name + backbone::kTensorExtension;
    backbone::save_tensor(p->value, directory / file);
    params.push_back({{"name", name}, {"file", file}, {"shape", p->value.shape()}});
  }
  const nlohmann::json index{
      {"spec", to_json(model.spec())},
      {"fingerprint", fingerprint(model.spec())},
      {"parameters", params},
  };
  std::ofstream out(directory / "model.json", std::ios::trunc);
  if (!out) fail(ErrorCode::kIoFailure, "cannot write checkpoint index in " + directory.string());
  out << index.dump(2) << '\n';
}

ModelSpec checkpoint_spec(const std::filesystem::path& directory) {
  return model_spec_from_json(read_index(directory).at("spec"));
}

Model load_checkpoint(const std::filesystem::path& directory, const ModelSpec& expected) {
  const auto index = read_index(directory);
  const std::string stored = index.value("fingerprint", std::string());
  const std::string want = fingerprint(expected);
  if (stored != want) {
    fail(ErrorCode::kCheckpointMismatch, "checkpoint fingerprint " + stored +
                                             " does not match model spec fingerprint " + want);
  }
  Model model(model_spec_from_json(index.at("spec")), 0);
  auto params = model.named_parameters();
  const auto& entries = index.at("parameters");
  if (entries.size() != params.size()) {
    fail(ErrorCode::kCheckpointMismatch, "checkpoint holds " + std::to_string(entries.size()) +
                                             " parameters, model has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != params[i].first) {
      fail(ErrorCode::kCheckpointMismatch, "parameter order differs at " + params[i].first);
    }
    Tensor value = backbone::load_feature_map(directory / e.at("file").get<std::string>());
    if (value.shape() != params[i].second->value.shape()) {
      fail(ErrorCode::kCheckpointMismatch, "shape differs for " + params[i].first);
    }
    params[i].second->value = std::move(value);
  }
  return model;
}

}  // namespace gapnet::pipeline
