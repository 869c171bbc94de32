// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapnet/data.hpp"
#include "gapnet/eval.hpp"
#include "gapnet/pipeline.hpp"
#include "gapnet/train.hpp"

namespace gapnet::cli {

namespace fs = std::filesystem;

enum class InputMode { kImages, kFeatures };

/// One experiment, read from a JSON file. Relative paths resolve against the
/// file's directory.
struct ExperimentConfig {
  fs::path manifest;
  InputMode mode = InputMode::kImages;
  fs::path features_dir;
  std::size_t image_size = 224;
  pipeline::ModelSpec model;
  train::TrainConfig train;
  fs::path output_dir;
  std::uint64_t seed = 0;
};

ExperimentConfig parse_config(const nlohmann::json& j, const fs::path& base_dir);
ExperimentConfig load_config(const fs::path& path);

/// 0 success, 1 contract violation in inputs, 2 missing resource.
int exit_code(ErrorCode code);

struct PrepareOptions {
  fs::path raw_dir;
  fs::path out_manifest;
  std::optional<std::size_t> balance_to;
  std::optional<std::uint64_t> seed;
  std::vector<double> split;
  data::SplitLevel level = data::SplitLevel::kSubject;
  bool manifest_only = false;
  std::size_t image_size = 224;
  std::size_t threads = 1;
};

/// raw_dir/manifest.jsonl -> balance -> split -> out manifest; unless
/// manifest_only, also writes one preprocessed TensorFile per record next to it.
data::Manifest cmd_prepare(const PrepareOptions& options);

struct SynthOptions {
  fs::path out_dir;
  data::SyntheticOptions data;
};

/// PGM images plus manifest.jsonl for the synthetic blob dataset.
void cmd_synth(const SynthOptions& options);

/// Projected feature vector per manifest record, as <out_dir>/<sample_id>.btft.
std::size_t cmd_extract(const fs::path& config, const fs::path& out_dir,
                        const std::optional<fs::path>& checkpoint = std::nullopt);

/// Trains into output_dir: checkpoint/, epochs.csv, train.json.
train::TrainResult cmd_train(const fs::path& config);

/// Scores the TEST split (VAL if there is none) into output_dir:
/// metrics.json, confusion.csv, confusion.svg.
eval::MetricsReport cmd_eval(const fs::path& config, const std::optional<fs::path>& checkpoint = std::nullopt);

/// Reads metrics.json from every run (a directory holding one, or the
/// subdirectories of `runs[i]` that do) and writes comparison.csv and timing.csv.
std::vector<eval::MetricsReport> cmd_report(const std::vector<fs::path>& runs, const fs::path& out_dir);

/// Worker threads from GAPNET_THREADS; 1 when unset.
std::size_t threads_from_env();

/// Parses argv and dispatches; returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gapnet::cli
