// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "CLI11.hpp"
#include "gapnet/backbone.hpp"

namespace gapnet::cli {

namespace {

[[noreturn]] void bad_config(const std::string& what) { fail(ErrorCode::kConfigInvalid, what); }

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) fail(ErrorCode::kMissingResource, what + " " + p.string() + " does not exist");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIoFailure, "write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  require_exists(path, "file");
  std::ifstream in(path, std::ios::binary);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

// Exclusive marker in an output directory; removed when the run ends.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".gapnet.lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      if (fs::exists(path_)) bad_config("output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
      fail(ErrorCode::kIoFailure, "cannot create " + path_.string());
    }
    std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

// resize -> equalize -> (transform) -> normalize. Flips and quarter turns
// permute pixels, so equalizing before or after the transform is the same.
Tensor prepared_image(const fs::path& path, const data::ManifestRecord& r, std::size_t size) {
  data::GrayImage img = data::histogram_equalize(data::resize_bilinear(data::read_pgm(path), size, size));
  if (auto t = data::transform_of(r)) img = data::augment(img, *t);
  return data::normalize(img);
}

std::map<std::string, const data::ManifestRecord*> index_by_id(const data::Manifest& m) {
  std::map<std::string, const data::ManifestRecord*> out;
  for (const auto& r : m) out[r.sample_id] = &r;
  return out;
}

// Model input for one record: a [S x S x 3] image or an imported feature map.
class InputLoader {
 public:
  explicit InputLoader(const ExperimentConfig& cfg)
      : cfg_(cfg), root_(cfg.manifest.parent_path()), features_(cfg.features_dir) {}

  Tensor load(const data::ManifestRecord& r) {
    if (cfg_.mode == InputMode::kFeatures) return features_.load(r.sample_id);
    const fs::path path = root_ / r.path;
    Tensor t = path.extension() == backbone::kTensorExtension ? backbone::load_feature_map(path)
                                                             : prepared_image(path, r, cfg_.image_size);
    if (t.rank() == 3 && t.shape()[2] == 1) return data::replicate_channels(t);
    return t;
  }

 private:
  const ExperimentConfig& cfg_;
  fs::path root_;
  backbone::ImportedFeatures features_;
};

std::vector<train::Example> load_split(const ExperimentConfig& cfg, const data::Manifest& m, data::Split split) {
  InputLoader loader(cfg);
  std::vector<train::Example> out;
  for (const auto& r : m) {
    if (r.split == split) out.push_back({r.sample_id, loader.load(r), r.label});
  }
  return out;
}

pipeline::ModelSpec parse_model(const nlohmann::json& j, InputMode mode) {
  pipeline::ModelSpec spec;
  bool explicit_backbone = false;
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "dfn") spec = pipeline::ModelSpec::dfn();
    else if (name == "fcnn") spec = pipeline::ModelSpec::fcnn();
    else if (name == "cnn1d") spec = pipeline::ModelSpec::cnn1d();
    else bad_config("unknown model preset '" + name + "' (dfn, fcnn, cnn1d)");
  } else {
    spec = pipeline::model_spec_from_json(j);
    explicit_backbone = j.contains("backbone");
  }
  if (mode == InputMode::kImages && !explicit_backbone) {
    spec.backbone = pipeline::BackboneKind::kToyCnn;
    if (!j.is_object() || !j.contains("head_input_channels")) spec.head_input_channels = 16;
  }
  const bool toy = spec.backbone == pipeline::BackboneKind::kToyCnn;
  if (toy != (mode == InputMode::kImages)) {
    bad_config(toy ? "toy_cnn backbone needs dataset.mode \"images\""
                   : "imported_features backbone needs dataset.mode \"features\"");
  }
  pipeline::validate(spec);
  return spec;
}

std::string counts(const data::Manifest& m) {
  return std::to_string(data::count_label(m, 0)) + " non-tumor / " + std::to_string(data::count_label(m, 1)) + " tumor";
}

}  // namespace

// ---------------------------------------------------------------- config

ExperimentConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) bad_config("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    if (!j.contains("seed")) bad_config("seed is mandatory");
    if (!j.at("seed").is_number_unsigned()) bad_config("seed must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();

    if (!j.contains("dataset")) bad_config("dataset section is missing");
    const auto& d = j.at("dataset");
    const std::string mode = d.value("mode", std::string("images"));
    if (mode == "images") c.mode = InputMode::kImages;
    else if (mode == "features") c.mode = InputMode::kFeatures;
    else bad_config("dataset.mode must be \"images\" or \"features\", got \"" + mode + "\"");
    if (!d.contains("manifest")) bad_config("dataset.manifest is missing");
    c.manifest = base_dir / d.at("manifest").get<std::string>();
    c.image_size = d.value("image_size", c.image_size);
    if (c.image_size == 0) bad_config("dataset.image_size must be positive");
    if (c.mode == InputMode::kFeatures) {
      if (!d.contains("features_dir")) bad_config("dataset.features_dir is required in features mode");
      c.features_dir = base_dir / d.at("features_dir").get<std::string>();
    }

    if (!j.contains("model")) bad_config("model is missing");
    c.model = parse_model(j.at("model"), c.mode);
    c.train = train::train_config_from_json(j.value("train", nlohmann::json()), c.seed);

    if (!j.contains("output_dir")) bad_config("output_dir is missing");
    c.output_dir = base_dir / j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    bad_config(std::string("experiment config: ") + e.what());
  }
  require_exists(c.manifest, "manifest");
  if (c.mode == InputMode::kFeatures) require_exists(c.features_dir, "features directory");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  require_exists(path, "config");
  nlohmann::json j;
  std::ifstream in(path, std::ios::binary);
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    bad_config(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

int exit_code(ErrorCode code) { return code == ErrorCode::kMissingResource ? 2 : 1; }

std::size_t threads_from_env() {
  const char* v = std::getenv("GAPNET_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) bad_config(std::string("GAPNET_THREADS must be a positive integer, got '") + v + "'");
  return static_cast<std::size_t>(n);
}

// ---------------------------------------------------------------- prepare / synth

data::Manifest cmd_prepare(const PrepareOptions& o) {
  if (!fs::is_directory(o.raw_dir)) fail(ErrorCode::kMissingResource, "input directory " + o.raw_dir.string() + " does not exist");
  if ((o.balance_to || !o.split.empty()) && !o.seed) bad_config("--seed is required with --balance-to or --split");
  if (o.threads == 0) bad_config("thread count must be positive");
  data::Manifest m = data::load_manifest(o.raw_dir / "manifest.jsonl");
  const data::Manifest originals = m;

  if (o.balance_to) m = data::balance_classes(m, *o.balance_to, *o.seed);
  if (!o.split.empty()) m = data::split(m, o.split, *o.seed, o.level);

  const fs::path out_dir = o.out_manifest.parent_path();
  if (!out_dir.empty()) fs::create_directories(out_dir);

  if (!o.manifest_only) {
    const auto sources = index_by_id(originals);
    fs::create_directories(out_dir / "tensors");
    // Records are independent; workers take a fixed stride so output files
    // do not depend on scheduling.
    std::vector<std::exception_ptr> errors(o.threads);
    auto work = [&](std::size_t w) {
      try {
        for (std::size_t i = w; i < m.size(); i += o.threads) {
          auto& r = m[i];
          const auto src_it = sources.find(r.augmented_from.value_or(r.sample_id));
          if (src_it == sources.end()) fail(ErrorCode::kMissingResource, "source record of " + r.sample_id + " is not in the manifest");
          const auto* src = src_it->second;
          const std::string file = "tensors/" + r.sample_id + backbone::kTensorExtension;
          backbone::save_tensor(prepared_image(o.raw_dir / src->path, r, o.image_size), out_dir / file);
          r.path = file;
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < o.threads; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  data::save_manifest(m, o.out_manifest);
  return m;
}

void cmd_synth(const SynthOptions& o) {
  fs::create_directories(o.out_dir / "images");
  data::Manifest m;
  for (auto& s : data::make_synthetic_dataset(o.data)) {
    s.record.path = "images/" + s.record.sample_id + ".pgm";
    data::write_pgm(s.image, o.out_dir / s.record.path);
    m.push_back(std::move(s.record));
  }
  data::save_manifest(m, o.out_dir / "manifest.jsonl");
}

// ---------------------------------------------------------------- extract / train / eval

std::size_t cmd_extract(const fs::path& config, const fs::path& out_dir, const std::optional<fs::path>& checkpoint) {
  const auto cfg = load_config(config);
  pipeline::Model model = checkpoint ? pipeline::load_checkpoint(*checkpoint, cfg.model)
                                     : pipeline::Model(cfg.model, cfg.seed);
  const auto manifest = data::load_manifest(cfg.manifest);
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  InputLoader loader(cfg);
  for (const auto& r : manifest) {
    backbone::save_tensor(model.extract(loader.load(r)), out_dir / (r.sample_id + backbone::kTensorExtension));
  }
  return manifest.size();
}

train::TrainResult cmd_train(const fs::path& config) {
  const auto cfg = load_config(config);
  const auto manifest = data::load_manifest(cfg.manifest);
  fs::create_directories(cfg.output_dir);
  RunLock lock(cfg.output_dir);

  train::Dataset d;
  d.train = load_split(cfg, manifest, data::Split::kTrain);
  d.val = load_split(cfg, manifest, data::Split::kVal);
  pipeline::Model model(cfg.model, cfg.seed);
  const auto result = train::train_loop(model, d, cfg.train);

  pipeline::save_checkpoint(model, cfg.output_dir / "checkpoint");
  write_text(cfg.output_dir / "epochs.csv", train::epoch_csv(result.epochs));
  const nlohmann::ordered_json summary{
      {"model", cfg.model.name},
      {"fingerprint", pipeline::fingerprint(cfg.model)},
      {"seed", cfg.seed},
      {"epochs", result.epochs.size()},
      {"early_stopped", result.early_stopped},
      {"best_val_loss", result.best_val_loss},
      {"train", train::to_json(cfg.train)},
      {"seconds_per_epoch", result.timing.seconds_per_epoch},
      {"test_ms_per_image", result.timing.test_ms_per_image},
  };
  write_text(cfg.output_dir / "train.json", summary.dump(2) + "\n");
  return result;
}

eval::MetricsReport cmd_eval(const fs::path& config, const std::optional<fs::path>& checkpoint) {
  const auto cfg = load_config(config);
  pipeline::Model model = pipeline::load_checkpoint(checkpoint.value_or(cfg.output_dir / "checkpoint"), cfg.model);
  const auto manifest = data::load_manifest(cfg.manifest);
  const auto split = data::count_split(manifest, data::Split::kTest) > 0 ? data::Split::kTest : data::Split::kVal;
  const auto examples = load_split(cfg, manifest, split);
  if (examples.empty()) fail(ErrorCode::kEmptySplit, "manifest has no test or validation records");
  fs::create_directories(cfg.output_dir);
  RunLock lock(cfg.output_dir);

  std::vector<int> predictions, labels;
  std::vector<Tensor> inputs;
  for (const auto& ex : examples) {
    predictions.push_back(model.predict(ex.input).y);
    labels.push_back(ex.label);
    inputs.push_back(ex.input);
  }
  eval::MetricsReport report = eval::metrics(eval::confusion(predictions, labels));
  report.model = cfg.model.name;
  report.config_fingerprint = pipeline::fingerprint(cfg.model);
  report.seed = cfg.seed;
  report.test_ms_per_image = eval::measure_inference(model, inputs);
  const fs::path train_summary = cfg.output_dir / "train.json";
  if (fs::exists(train_summary)) report.seconds_per_epoch = read_json(train_summary).value("seconds_per_epoch", 0.0);

  write_text(cfg.output_dir / "metrics.json", eval::to_json(report).dump(2) + "\n");
  write_text(cfg.output_dir / "confusion.csv", eval::confusion_csv(report.confusion) + "\n");
  write_text(cfg.output_dir / "confusion.svg", eval::confusion_svg(report.confusion, "Confusion Matrix: " + report.model));
  return report;
}

// ---------------------------------------------------------------- report

std::vector<eval::MetricsReport> cmd_report(const std::vector<fs::path>& runs, const fs::path& out_dir) {
  std::vector<fs::path> files;
  for (const auto& run : runs) {
    if (!fs::is_directory(run)) fail(ErrorCode::kMissingResource, "run directory " + run.string() + " does not exist");
    if (fs::exists(run / "metrics.json")) {
      files.push_back(run / "metrics.json");
      continue;
    }
    std::vector<fs::path> found;
    for (const auto& entry : fs::directory_iterator(run)) {
      if (entry.is_directory() && fs::exists(entry.path() / "metrics.json")) found.push_back(entry.path() / "metrics.json");
    }
    std::sort(found.begin(), found.end());
    files.insert(files.end(), found.begin(), found.end());
  }
  if (files.empty()) fail(ErrorCode::kMissingResource, "no metrics.json found under the given run directories");

  std::vector<eval::MetricsReport> reports;
  for (const auto& f : files) reports.push_back(eval::metrics_from_json(read_json(f)));
  fs::create_directories(out_dir);
  write_text(out_dir / "comparison.csv", eval::comparison_table(reports));
  write_text(out_dir / "timing.csv", eval::timing_table(reports));
  return reports;
}

// ---------------------------------------------------------------- argv

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"gapnet: GAP-projection brain tumor classifier experiments"};
  app.require_subcommand(1);

  PrepareOptions prep;
  std::size_t balance_to = 0;
  std::uint64_t prep_seed = 0;
  std::string split_arg, level_arg = "subject";
  auto* prepare = app.add_subcommand("prepare", "Preprocess, balance and split a raw dataset");
  prepare->add_option("raw_dir", prep.raw_dir, "Directory holding manifest.jsonl and images")->required();
  prepare->add_option("out_manifest", prep.out_manifest, "Output manifest path")->required();
  auto* balance_opt = prepare->add_option("--balance-to", balance_to, "Top up every class to N records");
  auto* seed_opt = prepare->add_option("--seed", prep_seed, "Seed for balancing and splitting");
  prepare->add_option("--split", split_arg, "Fractions, e.g. 0.8,0.2 or 0.7,0.15,0.15");
  prepare->add_option("--level", level_arg, "Split granularity")->check(CLI::IsMember({"subject", "sample"}));
  prepare->add_flag("--manifest-only", prep.manifest_only, "Skip pixel work; write the manifest only");
  prepare->add_option("--size", prep.image_size, "Output image side");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic blob dataset (PGM + manifest)");
  synth_cmd->add_option("out_dir", synth.out_dir)->required();
  synth_cmd->add_option("--count", synth.data.count);
  synth_cmd->add_option("--size", synth.data.size);
  synth_cmd->add_option("--slices-per-subject", synth.data.slices_per_subject);
  synth_cmd->add_option("--seed", synth.data.seed)->required();

  fs::path config, out_path, checkpoint;
  auto* extract = app.add_subcommand("extract", "Write projected feature vectors per sample");
  extract->add_option("config", config)->required();
  extract->add_option("--out", out_path)->required();
  auto* extract_ckpt = extract->add_option("--checkpoint", checkpoint);

  auto* train_cmd = app.add_subcommand("train", "Train one model from an experiment config");
  train_cmd->add_option("config", config)->required();

  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint; write metrics and confusion artifacts");
  eval_cmd->add_option("config", config)->required();
  auto* eval_ckpt = eval_cmd->add_option("--checkpoint", checkpoint);

  std::vector<fs::path> runs;
  auto* report = app.add_subcommand("report", "Aggregate run metrics into comparison tables");
  report->add_option("runs", runs)->required();
  auto* report_out = report->add_option("--out", out_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (prepare->parsed()) {
      if (*balance_opt) prep.balance_to = balance_to;
      if (*seed_opt) prep.seed = prep_seed;
      if (!split_arg.empty()) {
        std::stringstream ss(split_arg);
        std::string part;
        while (std::getline(ss, part, ',')) {
          try {
            std::size_t used = 0;
            prep.split.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
          } catch (const std::logic_error&) {
            bad_config("--split expects comma-separated fractions, got '" + split_arg + "'");
          }
        }
      }
      prep.level = level_arg == "sample" ? data::SplitLevel::kSample : data::SplitLevel::kSubject;
      prep.threads = threads_from_env();
      const auto m = cmd_prepare(prep);
      out << "prepare: " << m.size() << " records (" << counts(m) << ") -> " << prep.out_manifest.string() << "\n";
    } else if (synth_cmd->parsed()) {
      cmd_synth(synth);
      out << "synth: " << synth.data.count << " images -> " << synth.out_dir.string() << "\n";
    } else if (extract->parsed()) {
      const auto n = cmd_extract(config, out_path, *extract_ckpt ? std::optional(checkpoint) : std::nullopt);
      out << "extract: " << n << " feature vectors -> " << out_path.string() << "\n";
    } else if (train_cmd->parsed()) {
      const auto r = cmd_train(config);
      const auto& last = r.epochs.back();
      char buf[160];
      std::snprintf(buf, sizeof buf, "train: %zu epochs%s, val_loss %.4f, val_acc %.4f\n", r.epochs.size(),
                    r.early_stopped ? " (early stop)" : "", last.val_loss, last.val_acc);
      out << buf;
    } else if (eval_cmd->parsed()) {
      const auto r = cmd_eval(config, *eval_ckpt ? std::optional(checkpoint) : std::nullopt);
      char buf[160];
      std::snprintf(buf, sizeof buf, "eval: %s accuracy %.4f precision %.4f recall %.4f f1 %.4f\n", r.model.c_str(),
                    r.accuracy, r.precision, r.recall, r.f1);
      out << buf;
    } else if (report->parsed()) {
      const fs::path dir = *report_out ? out_path : runs.front();
      const auto reports = cmd_report(runs, dir);
      out << eval::comparison_table(reports);
    }
  } catch (const Error& e) {
    err << "gapnet: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "gapnet: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gapnet::cli
