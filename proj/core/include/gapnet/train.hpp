// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapnet/loss.hpp"
#include "gapnet/pipeline.hpp"

namespace gapnet::train {

/// Minimum absolute decrease in validation loss that counts as improvement,
/// shared by the plateau scheduler and early stopping.
inline constexpr double kImprovementDelta = 1e-4;

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 5;
  std::size_t lr_plateau_patience = 3;
  double lr_factor = 0.5;
  double min_lr = 1e-6;
  std::uint64_t seed = 0;
  /// Single-threaded, fixed batch order; required for bitwise-reproducible runs.
  bool deterministic = true;
};

/// Throws ConfigInvalid on a violated TrainConfig constraint.
void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, std::uint64_t seed);

// ---------------------------------------------------------------- Adam

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update. Moment buffers are created on the first
/// call; later calls must present the same parameter shapes in the same order.
void adam_step(AdamState& state, std::span<Tensor* const> params,
               std::span<const Tensor* const> grads, double lr);
void adam_step(AdamState& state, const std::vector<pipeline::NamedParameter>& params, double lr);

// ---------------------------------------------------------------- schedules

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs without a kImprovementDelta improvement; never drops below min_lr.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, std::size_t patience, double factor, double min_lr);
  explicit PlateauScheduler(const TrainConfig& config)
      : PlateauScheduler(config.learning_rate, config.lr_plateau_patience, config.lr_factor,
                         config.min_lr) {}

  /// Records one epoch's validation loss; returns the rate for the next epoch.
  double step(double val_loss);
  double lr() const { return lr_; }

 private:
  double lr_;
  std::size_t patience_;
  double factor_;
  double min_lr_;
  double reference_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

/// Rate in effect after replaying `history` through a PlateauScheduler.
double lr_on_plateau(std::span<const double> history, const TrainConfig& config);

enum class StopDecision { kContinue, kStop };

struct EarlyStopState {
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_seen = 0;
  std::size_t epochs_since_improve = 0;
  std::vector<Tensor> best_parameters;
  /// Loss at the last counter reset; improvements are measured against it.
  double improvement_reference = std::numeric_limits<double>::infinity();
};

/// best_val_loss tracks the minimum seen (and snapshots the model there);
/// the patience counter resets only on a kImprovementDelta improvement. On
/// kStop the best snapshot is restored into `model`.
StopDecision early_stop_update(EarlyStopState& state, double val_loss, std::size_t patience,
                               pipeline::Model* model = nullptr);

// ---------------------------------------------------------------- loop

struct Example {
  std::string id;
  Tensor input;
  int label = 0;
};

struct Dataset {
  std::vector<Example> train;
  std::vector<Example> val;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;
  double lr = 0;
  double seconds = 0;
};

struct TimingReport {
  double seconds_per_epoch = 0;
  double test_ms_per_image = 0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  TimingReport timing;
  bool early_stopped = false;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

struct Evaluation {
  double loss = 0;
  double accuracy = 0;
};

/// Mean BCE and accuracy in eval mode over examples whose inputs are already
/// backbone feature maps (`features_ready`) or raw model inputs.
Evaluation evaluate(pipeline::Model& model, std::span<const Example> examples,
                    bool features_ready = false);

/// Seeded epoch loop: shuffle, mini-batch forward/BCE/backward/Adam, then
/// validation, plateau scheduling and early stopping. A frozen toy backbone
/// is run once per example up front and training proceeds on cached maps.
TrainResult train_loop(pipeline::Model& model, const Dataset& data, const TrainConfig& config);

inline constexpr const char* kEpochCsvHeader =
    "epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds_per_epoch";

std::string epoch_csv(std::span<const EpochLog> epochs);

}  // namespace gapnet::train
