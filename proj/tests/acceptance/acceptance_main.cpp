// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Pass criterion numbers as arguments
// to run a subset, e.g. `gapnet_acceptance 1 7 8`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "gapnet/data.hpp"
#include "gapnet/eval.hpp"
#include "gapnet/gradcheck.hpp"
#include "gapnet/pipeline.hpp"
#include "gapnet/train.hpp"

namespace {

using namespace gapnet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// ---------------------------------------------------------------- 1 gradients

Outcome gradient_fidelity() {
  const auto start = Clock::now();
  constexpr int kInstances = 25;
  struct Family {
    const char* name;
    std::function<std::pair<nn::Sequential<float>, Tensor>(Rng&)> make;
  };
  const std::vector<Family> families{
      {"dense",
       [](Rng& rng) {
         nn::Sequential<float> s;
         const std::size_t din = 1 + rng.below(12), dout = 1 + rng.below(12);
         s.emplace<nn::DenseLayer<float>>(din, dout, rng);
         return std::pair{std::move(s), random_tensor({din}, rng, -2, 2)};
       }},
      {"conv1d",
       [](Rng& rng) {
         nn::Sequential<float> s;
         const std::size_t cin = 1 + rng.below(3), f = 1 + rng.below(4), k = 1 + rng.below(5);
         const std::size_t n = k + rng.below(12);
         s.emplace<nn::Conv1dLayer<float>>(cin, f, k, rng);
         return std::pair{std::move(s), cin == 1 ? random_tensor({n}, rng) : random_tensor({cin, n}, rng)};
       }},
      {"conv2d",
       [](Rng& rng) {
         nn::Sequential<float> s;
         const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(3), k = 1 + rng.below(3);
         const std::size_t stride = 1 + rng.below(2);
         const std::size_t h = k + rng.below(6), w = k + rng.below(6);
         s.emplace<nn::Conv2dLayer<float>>(cin, cout, k, stride, rng);
         return std::pair{std::move(s), random_tensor({h, w, cin}, rng)};
       }},
      {"gap",
       [](Rng& rng) {
         nn::Sequential<float> s;
         s.emplace<nn::GapLayer<float>>();
         return std::pair{std::move(s), random_tensor({1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(6)}, rng)};
       }},
      {"sigmoid",
       [](Rng& rng) {
         nn::Sequential<float> s;
         s.emplace<nn::SigmoidLayer<float>>();
         return std::pair{std::move(s), random_tensor({1 + rng.below(16)}, rng, -6, 6)};
       }},
      {"relu",
       [](Rng& rng) {
         nn::Sequential<float> s;
         s.emplace<nn::ReluLayer<float>>();
         // Keep every input at least 10 steps away from the kink at 0.
         Tensor x({1 + rng.below(16)});
         for (auto& v : x.data()) v = static_cast<float>((rng.below(2) ? 1 : -1) * rng.uniform(0.01, 2.0));
         return std::pair{std::move(s), std::move(x)};
       }},
      {"dropout(fixed mask)",
       [](Rng& rng) {
         nn::Sequential<float> s;
         const std::size_t n = 1 + rng.below(16);
         auto& d = s.emplace<nn::DropoutLayer<float>>(rng.uniform(0.1, 0.9), rng.next());
         Tensor keep({n});
         for (auto& v : keep.data()) v = rng.below(2) ? 1.0f : 0.0f;
         d.set_fixed_mask(keep);
         return std::pair{std::move(s), random_tensor({n}, rng)};
       }},
  };

  bool all = true;
  std::string detail;
  for (const auto& fam : families) {
    Rng rng(derive_seed(2024, std::hash<std::string>{}(fam.name) & 0xffff));
    double worst = 0.0;
    int ok = 0;
    for (int i = 0; i < kInstances; ++i) {
      auto [fragment, input] = fam.make(rng);
      nn::GradCheckOptions opt;
      opt.seed = static_cast<std::uint64_t>(i);
      const auto report = nn::gradient_check(fragment, input, opt);
      worst = std::max(worst, report.max_band_ratio);
      ok += report.within_band;
    }
    all = all && ok == kInstances;
    detail += format("%s %d/%d (worst %.2g of band); ", fam.name, ok, kInstances, worst);
  }
  const double t = seconds_since(start);
  detail += format("%.2fs", t);
  return {all && t < 30.0, detail};
}

// ---------------------------------------------------------------- 2 oracles

Outcome oracle_equivalence() {
  const auto start = Clock::now();
  constexpr int kInstances = 1000;
  Rng rng(99);

  double gap_err = 0.0;
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t h = 1 + rng.below(14), w = 1 + rng.below(14), c = 1 + rng.below(64);
    const Tensor x = random_tensor({h, w, c}, rng);
    const Tensor got = mean_over_spatial(x);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t q = 0; q < w; ++q) sum += x.at(r, q, ch);
      gap_err = std::max(gap_err, std::abs(got[ch] - sum / static_cast<double>(h * w)));
    }
  }

  double conv_err = 0.0;
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t k = 1 + rng.below(7), n = k + rng.below(40);
    const Tensor x = random_tensor({n}, rng), kernel = random_tensor({k}, rng);
    const float bias = static_cast<float>(rng.uniform(-1, 1));
    const Tensor got = conv1d_valid(x, kernel, bias);
    for (std::size_t t = 0; t + k <= n; ++t) {
      double y = bias;
      for (std::size_t j = 0; j < k; ++j) y += static_cast<double>(kernel[j]) * x[t + j];
      conv_err = std::max(conv_err, std::abs(got[t] - y));
    }
    // Multi-channel layer path: y[f][t] = b[f] + sum_c sum_j W[f][c][j] x[c][t + j].
    const std::size_t cin = 1 + rng.below(3), filters = 1 + rng.below(4);
    nn::Conv1dLayer<float> layer(cin, filters, k, rng);
    const Tensor xc = random_tensor({cin, n}, rng);
    const Tensor out = layer.forward(xc, nn::Mode::kEval);
    const auto params = layer.parameters();
    const Tensor& W = params[0]->value;
    const Tensor& b = params[1]->value;
    for (std::size_t f = 0; f < filters; ++f) {
      for (std::size_t t = 0; t + k <= n; ++t) {
        double y = b[f];
        for (std::size_t ch = 0; ch < cin; ++ch)
          for (std::size_t j = 0; j < k; ++j) y += static_cast<double>(W[(f * cin + ch) * k + j]) * xc[ch * n + t + j];
        conv_err = std::max(conv_err, std::abs(out[f * (n - k + 1) + t] - y));
      }
    }
  }

  int metric_mismatch = 0;
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t n = 1 + rng.below(200);
    const double bias = rng.uniform();
    std::vector<int> pred(n), label(n);
    for (std::size_t j = 0; j < n; ++j) {
      label[j] = rng.uniform() < bias ? 1 : 0;
      pred[j] = rng.uniform() < 0.8 ? label[j] : 1 - label[j];
    }
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t j = 0; j < n; ++j) {
      tp += pred[j] == 1 && label[j] == 1;
      tn += pred[j] == 0 && label[j] == 0;
      fp += pred[j] == 1 && label[j] == 0;
      fn += pred[j] == 0 && label[j] == 1;
    }
    const double acc = double(tp + tn) / double(n);
    const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double f1 = prec + rec > 0 ? 2.0 * (prec * rec) / (prec + rec) : 0.0;
    const auto r = eval::metrics(eval::confusion(pred, label));
    const auto same = [](double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; };
    if (!(same(r.accuracy, acc) && same(r.precision, prec) && same(r.recall, rec) && same(r.f1, f1) &&
          r.confusion == eval::ConfusionMatrix{tp, tn, fp, fn})) {
      ++metric_mismatch;
    }
  }

  const double t = seconds_since(start);
  const bool pass = gap_err <= 1e-6 && conv_err <= 1e-6 && metric_mismatch == 0 && t < 10.0;
  return {pass, format("GAP max err %.2g, conv1d max err %.2g, metrics bitwise mismatches %d over %d each; %.2fs",
                       gap_err, conv_err, metric_mismatch, kInstances, t)};
}

// ---------------------------------------------------------------- shared synthetic data

pipeline::ModelSpec toy_spec(pipeline::ModelSpec spec) {
  spec.backbone = pipeline::BackboneKind::kToyCnn;
  spec.head_input_channels = 16;
  return spec;
}

Tensor model_input(const data::GrayImage& img) { return data::replicate_channels(data::preprocess(img)); }

// ---------------------------------------------------------------- 3 overfit

Outcome overfit() {
  const auto start = Clock::now();
  data::SyntheticOptions so;
  so.count = 8;
  so.seed = 31;
  const auto samples = data::make_synthetic_dataset(so);
  pipeline::Model model(toy_spec(pipeline::ModelSpec::dfn()), 31);

  // Prefer a sample the untrained model gets wrong.
  const data::SyntheticSample* pick = &samples.front();
  for (const auto& s : samples) {
    if (model.predict(model_input(s.image)).y != s.record.label) {
      pick = &s;
      break;
    }
  }
  const train::Example ex{pick->record.sample_id, model_input(pick->image), pick->record.label};
  train::Dataset d;
  d.train.assign(32, ex);
  d.val = {ex};

  train::TrainConfig c;
  c.learning_rate = 1e-4;
  c.max_epochs = 200;
  c.early_stop_patience = 200;
  c.seed = 31;
  const auto r = train::train_loop(model, d, c);
  std::size_t reached = 0;
  for (const auto& e : r.epochs) {
    if (e.train_acc == 1.0) {
      reached = e.epoch;
      break;
    }
  }
  const double t = seconds_since(start);
  return {reached > 0 && t < 60.0,
          format("label %d, train acc 1.0 first at epoch %zu of %zu, final train loss %.4g; %.2fs", ex.label, reached,
                 r.epochs.size(), r.epochs.back().train_loss, t)};
}

// ---------------------------------------------------------------- 4 + 6 synthetic end to end

struct HeadRun {
  std::string name;
  double val_acc = 0;
  std::size_t epochs = 0;
  std::string csv;
};

std::vector<HeadRun> synthetic_end_to_end() {
  data::SyntheticOptions so;
  so.count = 400;
  so.size = 224;
  so.seed = 7;
  const auto samples = data::make_synthetic_dataset(so);
  data::Manifest m;
  for (const auto& s : samples) m.push_back(s.record);
  const std::vector<double> fractions{0.8, 0.2};
  m = data::split(m, fractions, 7, data::SplitLevel::kSubject);

  train::Dataset d;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    train::Example ex{m[i].sample_id, model_input(samples[i].image), m[i].label};
    (m[i].split == data::Split::kTrain ? d.train : d.val).push_back(std::move(ex));
  }

  std::vector<HeadRun> runs;
  for (const auto& spec : {pipeline::ModelSpec::dfn(), pipeline::ModelSpec::fcnn(), pipeline::ModelSpec::cnn1d()}) {
    pipeline::Model model(toy_spec(spec), 7);
    train::TrainConfig c;
    c.learning_rate = 1e-3;
    c.max_epochs = 30;
    c.seed = 7;
    const auto r = train::train_loop(model, d, c);
    runs.push_back({spec.name, train::evaluate(model, d.val).accuracy, r.epochs.size(), train::epoch_csv(r.epochs)});
  }
  return runs;
}

std::vector<HeadRun> first_run;

Outcome synthetic_accuracy() {
  const auto start = Clock::now();
  first_run = synthetic_end_to_end();
  bool ok = true;
  std::string detail = "400 images, subject-level 80/20: ";
  for (const auto& r : first_run) {
    ok = ok && r.val_acc >= 0.95 && r.epochs <= 30;
    detail += format("%s val acc %.4f (%zu epochs); ", r.name.c_str(), r.val_acc, r.epochs);
  }
  const double t = seconds_since(start);
  detail += format("%.1fs", t);
  return {ok && t < 600.0, detail};
}

std::string strip_timing(const std::string& csv) { return std::regex_replace(csv, std::regex(",[^,\n]*\n"), "\n"); }

Outcome determinism() {
  const auto start = Clock::now();
  if (first_run.empty()) first_run = synthetic_end_to_end();
  const auto second = synthetic_end_to_end();
  bool ok = second.size() == first_run.size();
  std::string detail;
  for (std::size_t i = 0; ok && i < second.size(); ++i) {
    const bool same = strip_timing(second[i].csv) == strip_timing(first_run[i].csv);
    ok = ok && same;
    detail += format("%s %s; ", second[i].name.c_str(), same ? "identical" : "DIFFERS");
  }
  detail += format("second run %.1fs", seconds_since(start));
  return {ok, detail};
}

// ---------------------------------------------------------------- 5 balancing

Outcome balancing() {
  const auto start = Clock::now();
  const fs::path dir = fs::temp_directory_path() / format("gapnet_acceptance_%ld", static_cast<long>(std::time(nullptr)));
  fs::create_directories(dir / "raw");
  {
    std::ofstream out(dir / "raw" / "manifest.jsonl", std::ios::binary);
    for (std::size_t i = 0; i < 13273 + 3671; ++i) {
      data::ManifestRecord r;
      r.sample_id = format("slice%05zu", i);
      r.path = r.sample_id + ".pgm";
      r.label = i < 13273 ? 0 : 1;
      r.subject_id = format("patient%04zu", i / 24);
      out << data::encode_record(r) << "\n";
    }
  }
  auto prepare = [&](const char* name) {
    const std::string raw = (dir / "raw").string(), out = (dir / name).string();
    const char* argv[] = {"gapnet", "prepare", raw.c_str(), out.c_str(), "--balance-to", "13252", "--seed", "2024", "--manifest-only"};
    std::ostringstream o, e;
    return cli::run(static_cast<int>(std::size(argv)), argv, o, e);
  };
  const int rc_a = prepare("a.jsonl");
  const double t = seconds_since(start);
  const int rc_b = prepare("b.jsonl");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  Outcome o;
  if (rc_a == 0 && rc_b == 0) {
    const auto m = data::load_manifest(dir / "a.jsonl");
    const std::size_t tumor = data::count_label(m, 1), non_tumor = data::count_label(m, 0);
    const bool same = slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl");
    o = {tumor == 13252 && non_tumor == 13273 && same && t < 5.0,
         format("3671/13273 -> %zu/%zu tumor/non-tumor, repeat run %s; %.2fs", tumor, non_tumor,
                same ? "byte-identical" : "DIFFERS", t)};
  } else {
    o = {false, format("prepare exited %d / %d", rc_a, rc_b)};
  }
  fs::remove_all(dir);
  return o;
}

// ---------------------------------------------------------------- 7 decision rule

Outcome decision_rule() {
  const double grid[] = {0.0, std::nextafter(0.5, 0.0), 0.5, std::nextafter(0.5, 1.0), 1.0};
  const int want[] = {0, 0, 0, 1, 1};
  std::string got;
  bool ok = true;
  for (int i = 0; i < 5; ++i) {
    const int y = pipeline::decide(grid[i]);
    ok = ok && y == want[i];
    got += std::to_string(y);
  }
  return {ok, "decide{0, 0.5-ulp, 0.5, 0.5+ulp, 1} = {" + got + "}"};
}

// ---------------------------------------------------------------- 8 policy traces

Outcome policy_traces() {
  pipeline::Model model(toy_spec(pipeline::ModelSpec::fcnn()), 3);
  const auto best = model.snapshot();
  train::EarlyStopState s;
  const double losses[] = {0.5, 0.6, 0.6, 0.6, 0.6, 0.6};
  std::size_t stop_epoch = 0;
  for (std::size_t e = 0; e < std::size(losses); ++e) {
    if (e == 1) model.named_parameters().back().second->value.fill(9.0f);
    if (train::early_stop_update(s, losses[e], 5, &model) == train::StopDecision::kStop) {
      stop_epoch = e + 1;
      break;
    }
  }
  const bool restored = model.snapshot() == best;

  train::TrainConfig c;
  c.learning_rate = 1e-4;
  c.lr_plateau_patience = 3;
  const double flat[] = {1, 1, 1, 1};
  const double lr = train::lr_on_plateau(flat, c);

  const bool ok = stop_epoch == 6 && s.best_val_loss == 0.5 && restored && lr == 5e-5;
  return {ok, format("early stop at epoch %zu, restored loss %.2g (weights %s); lr after [1,1,1,1] = %.3g", stop_epoch,
                     s.best_val_loss, restored ? "restored" : "NOT restored", lr)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* title;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "gradient fidelity", gradient_fidelity},
      {2, "oracle equivalence", oracle_equivalence},
      {3, "overfit", overfit},
      {4, "synthetic end-to-end", synthetic_accuracy},
      {5, "balancing arithmetic", balancing},
      {6, "determinism", determinism},
      {7, "decision rule", decision_rule},
      {8, "early-stop/scheduler traces", policy_traces},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
