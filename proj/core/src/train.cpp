// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "gapnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gapnet/eval.hpp"

namespace gapnet::train {

void validate(const TrainConfig& c) {
  auto bad = [](const std::string& what) { fail(ErrorCode::kConfigInvalid, what); };
  if (!(c.learning_rate > 0.0)) bad("learning_rate must be positive");
  if (c.batch_size < 1) bad("batch_size must be at least 1");
  if (c.max_epochs < 1) bad("max_epochs must be at least 1");
  if (c.early_stop_patience < 1) bad("early_stop_patience must be at least 1");
  if (c.lr_plateau_patience < 1) bad("lr_plateau_patience must be at least 1");
  if (!(c.lr_factor > 0.0 && c.lr_factor < 1.0)) bad("lr_factor must lie in (0, 1)");
  if (!(c.min_lr > 0.0)) bad("min_lr must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"max_epochs", c.max_epochs},
      {"early_stop_patience", c.early_stop_patience},
      {"lr_plateau_patience", c.lr_plateau_patience},
      {"lr_factor", c.lr_factor},
      {"min_lr", c.min_lr},
      {"deterministic", c.deterministic},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j, std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  try {
    if (!j.is_null()) {
      c.learning_rate = j.value("learning_rate", c.learning_rate);
      c.batch_size = j.value("batch_size", c.batch_size);
      c.max_epochs = j.value("max_epochs", c.max_epochs);
      c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
      c.lr_plateau_patience = j.value("lr_plateau_patience", c.lr_plateau_patience);
      c.lr_factor = j.value("lr_factor", c.lr_factor);
      c.min_lr = j.value("min_lr", c.min_lr);
      c.deterministic = j.value("deterministic", c.deterministic);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfigInvalid, std::string("train config: ") + e.what());
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------- Adam

void adam_step(AdamState& state, std::span<Tensor* const> params,
               std::span<const Tensor* const> grads, double lr) {
  if (params.size() != grads.size()) fail(ErrorCode::kShapeMismatch, "params and grads differ in count");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Tensor::zeros_like(*p));
      state.v.push_back(Tensor::zeros_like(*p));
    }
  }
  if (state.m.size() != params.size()) fail(ErrorCode::kShapeMismatch, "optimizer state tracks a different parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != state.m[i].shape()) {
      fail(ErrorCode::kShapeMismatch, "adam_step shape mismatch at parameter " + std::to_string(i));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    const auto g = grads[i]->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
      const double vk = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double m_hat = mk / c1, v_hat = vk / c2;
      p[k] = static_cast<float>(p[k] - lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
  }
}

void adam_step(AdamState& state, const std::vector<pipeline::NamedParameter>& params, double lr) {
  std::vector<Tensor*> values;
  std::vector<const Tensor*> grads;
  for (const auto& [name, p] : params) {
    values.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  adam_step(state, values, grads, lr);
}

// ---------------------------------------------------------------- schedules

PlateauScheduler::PlateauScheduler(double initial_lr, std::size_t patience, double factor, double min_lr)
    : lr_(std::max(initial_lr, min_lr)), patience_(patience), factor_(factor), min_lr_(min_lr) {}

double PlateauScheduler::step(double val_loss) {
  if (val_loss < reference_ - kImprovementDelta) {
    reference_ = val_loss;
    stale_ = 0;
  } else if (++stale_ >= patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    stale_ = 0;
  }
  return lr_;
}

double lr_on_plateau(std::span<const double> history, const TrainConfig& config) {
  PlateauScheduler s(config);
  for (double loss : history) s.step(loss);
  return s.lr();
}

StopDecision early_stop_update(EarlyStopState& state, double val_loss, std::size_t patience,
                               pipeline::Model* model) {
  ++state.epochs_seen;
  if (val_loss < state.best_val_loss) {
    state.best_val_loss = val_loss;
    state.best_epoch = state.epochs_seen;
    if (model) state.best_parameters = model->snapshot();
  }
  if (val_loss < state.improvement_reference - kImprovementDelta) {
    state.improvement_reference = val_loss;
    state.epochs_since_improve = 0;
    return StopDecision::kContinue;
  }
  if (++state.epochs_since_improve >= patience) {
    if (model && !state.best_parameters.empty()) model->restore(state.best_parameters);
    return StopDecision::kStop;
  }
  return StopDecision::kContinue;
}

// ---------------------------------------------------------------- loop

namespace {

float forward_example(pipeline::Model& model, const Tensor& input, nn::Mode mode, bool features_ready) {
  return features_ready ? model.forward_features(input, mode) : model.forward(input, mode);
}

}  // namespace

Evaluation evaluate(pipeline::Model& model, std::span<const Example> examples, bool features_ready) {
  if (examples.empty()) fail(ErrorCode::kEmptySplit, "nothing to evaluate");
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    const float p = forward_example(model, ex.input, nn::Mode::kEval, features_ready);
    loss += bce_loss<double>(p, ex.label).loss;
    correct += pipeline::decide(p, model.spec().decision_threshold) == ex.label;
  }
  const auto n = static_cast<double>(examples.size());
  return {loss / n, static_cast<double>(correct) / n};
}

TrainResult train_loop(pipeline::Model& model, const Dataset& data, const TrainConfig& config) {
  validate(config);
  if (data.train.empty()) fail(ErrorCode::kEmptySplit, "training split is empty");
  if (data.val.empty()) fail(ErrorCode::kEmptySplit, "validation split is empty");

  // A frozen backbone is a fixed function of the input; run it once.
  const bool cache_features = model.has_backbone() && !model.backbone_trainable();
  std::vector<Example> cached_train, cached_val;
  if (cache_features) {
    for (const auto& ex : data.train) cached_train.push_back({ex.id, model.features(ex.input), ex.label});
    for (const auto& ex : data.val) cached_val.push_back({ex.id, model.features(ex.input), ex.label});
  }
  const bool features_ready = cache_features || !model.has_backbone();
  const std::vector<Example>& train = cache_features ? cached_train : data.train;
  const std::vector<Example>& val = cache_features ? cached_val : data.val;

  auto params = model.trainable_parameters();
  AdamState adam;
  PlateauScheduler scheduler(config);
  EarlyStopState stopper;
  Rng shuffle_rng(derive_seed(config.seed, 0x5eed));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = scheduler.lr();
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      const auto batch = static_cast<float>(end - b);
      model.zero_grad();
      for (std::size_t k = b; k < end; ++k) {
        const Example& ex = train[order[k]];
        float p = 0.0f;
        try {
          p = forward_example(model, ex.input, nn::Mode::kTrain, features_ready);
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kNonFinite) fail(ErrorCode::kDivergedLoss, e.what());
          throw;
        }
        const auto [loss, grad] = bce_loss<float>(p, static_cast<float>(ex.label));
        if (!std::isfinite(loss)) fail(ErrorCode::kDivergedLoss, "non-finite loss at epoch " + std::to_string(epoch));
        loss_sum += loss;
        correct += pipeline::decide(p, model.spec().decision_threshold) == ex.label;
        model.backward(grad / batch);
      }
      adam_step(adam, params, lr);
    }

    const Evaluation v = evaluate(model, val, features_ready);
    if (!std::isfinite(v.loss)) fail(ErrorCode::kDivergedLoss, "non-finite validation loss");
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    const auto n = static_cast<double>(train.size());
    result.epochs.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n, v.loss,
                             v.accuracy, lr, elapsed.count()});
    scheduler.step(v.loss);
    if (early_stop_update(stopper, v.loss, config.early_stop_patience, &model) == StopDecision::kStop) {
      result.early_stopped = true;
      break;
    }
  }
  result.best_val_loss = stopper.best_val_loss;

  double total = 0.0;
  for (const auto& e : result.epochs) total += e.seconds;
  result.timing.seconds_per_epoch = total / static_cast<double>(result.epochs.size());
  std::vector<Tensor> inputs;
  inputs.reserve(data.val.size());
  for (const auto& ex : data.val) inputs.push_back(ex.input);
  result.timing.test_ms_per_image = eval::measure_inference(model, inputs);
  return result;
}

std::string epoch_csv(std::span<const EpochLog> epochs) {
  std::string out = std::string(kEpochCsvHeader) + "\n";
  char buf[256];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.6f\n", e.epoch, e.train_loss,
                  e.train_acc, e.val_loss, e.val_acc, e.lr, e.seconds);
    out += buf;
  }
  return out;
}

}  // namespace gapnet::train
