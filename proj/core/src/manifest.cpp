// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "gapnet/data.hpp"
#include "gapnet/rng.hpp"

namespace gapnet::data {

std::string_view to_string(Plane p) {
  switch (p) {
    case Plane::kAxial: return "axial";
    case Plane::kCoronal: return "coronal";
    case Plane::kSagittal: return "sagittal";
    case Plane::kUnknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "unassigned";
}

Plane parse_plane(std::string_view s) {
  for (auto p : {Plane::kAxial, Plane::kCoronal, Plane::kSagittal, Plane::kUnknown}) {
    if (to_string(p) == s) return p;
  }
  fail(ErrorCode::kParseError, "unknown plane '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  for (auto x : {Split::kTrain, Split::kVal, Split::kTest, Split::kUnassigned}) {
    if (to_string(x) == s) return x;
  }
  fail(ErrorCode::kParseError, "unknown split '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- JSON lines

std::string encode_record(const ManifestRecord& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["path"] = r.path;
  j["label"] = r.label;
  j["subject_id"] = r.subject_id;
  j["plane"] = to_string(r.plane);
  j["split"] = to_string(r.split);
  if (r.augmented_from) j["augmented_from"] = *r.augmented_from;
  return j.dump();
}

ManifestRecord decode_record(std::string_view line, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number);
  try {
    const auto j = nlohmann::json::parse(line);
    if (!j.is_object()) fail(ErrorCode::kParseError, where + ": expected a JSON object");
    ManifestRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    if (r.sample_id.empty()) fail(ErrorCode::kParseError, where + ": empty sample_id");
    r.path = j.at("path").get<std::string>();
    r.label = j.at("label").get<int>();
    if (r.label != 0 && r.label != 1) fail(ErrorCode::kParseError, where + ": label must be 0 or 1");
    r.subject_id = j.value("subject_id", r.sample_id);
    r.plane = parse_plane(j.value("plane", std::string("unknown")));
    r.split = parse_split(j.value("split", std::string("unassigned")));
    if (j.contains("augmented_from")) r.augmented_from = j.at("augmented_from").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, where + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError && std::string(e.what()).find("line ") != std::string::npos) throw;
    fail(ErrorCode::kParseError, where + ": " + e.what());
  }
}

Manifest parse_manifest(std::string_view text) {
  Manifest out;
  std::unordered_set<std::string> seen;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_number;
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      auto rec = decode_record(line, line_number);
      if (!seen.insert(rec.sample_id).second) {
        fail(ErrorCode::kDuplicateId, "line " + std::to_string(line_number) + ": sample_id '" +
                                          rec.sample_id + "' already present");
      }
      out.push_back(std::move(rec));
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

std::string serialize_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& r : manifest) {
    out += encode_record(r);
    out += '\n';
  }
  return out;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingResource, "manifest " + path.string() + " not found");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::unordered_set<std::string> seen;
  for (const auto& r : manifest) {
    if (!seen.insert(r.sample_id).second) {
      fail(ErrorCode::kDuplicateId, "sample_id '" + r.sample_id + "' appears twice");
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoFailure, "cannot write manifest " + path.string());
  out << serialize_manifest(manifest);
  if (!out) fail(ErrorCode::kIoFailure, "write failed for " + path.string());
}

std::string augmented_id(std::string_view source_id, Transform t) {
  return std::string(source_id) + "@" + std::string(to_string(t));
}

std::optional<Transform> transform_of(const ManifestRecord& r) {
  if (!r.augmented_from) return std::nullopt;
  const auto at = r.sample_id.rfind('@');
  if (at == std::string::npos) return std::nullopt;
  return parse_transform(std::string_view(r.sample_id).substr(at + 1));
}

std::size_t count_label(const Manifest& manifest, int label) {
  return static_cast<std::size_t>(std::count_if(manifest.begin(), manifest.end(),
                                                [label](const auto& r) { return r.label == label; }));
}

std::size_t count_split(const Manifest& manifest, Split split) {
  return static_cast<std::size_t>(std::count_if(manifest.begin(), manifest.end(),
                                                [split](const auto& r) { return r.split == split; }));
}

// ---------------------------------------------------------------- balancing

Manifest balance_classes(const Manifest& manifest, std::size_t target, std::uint64_t seed) {
  Manifest out = manifest;
  std::unordered_set<std::string> ids;
  for (const auto& r : manifest) ids.insert(r.sample_id);

  for (int label : {0, 1}) {
    const std::size_t count = count_label(manifest, label);
    if (count >= target) continue;

    std::vector<std::size_t> sources;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      if (manifest[i].label == label && !manifest[i].augmented_from) sources.push_back(i);
    }
    const std::size_t need = target - count;
    if (sources.empty() || target > count * (kAllTransforms.size() + 1)) {
      fail(ErrorCode::kTargetUnreachable,
           "class " + std::to_string(label) + " has " + std::to_string(count) +
               " records; at most " + std::to_string(count * (kAllTransforms.size() + 1)) +
               " are reachable, target is " + std::to_string(target));
    }

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
    rng.shuffle(std::span<std::size_t>(sources));

    std::size_t added = 0;
    for (auto t : kAllTransforms) {
      for (std::size_t src : sources) {
        if (added == need) break;
        const auto& s = manifest[src];
        std::string id = augmented_id(s.sample_id, t);
        if (ids.contains(id)) continue;  // pair already used by an earlier run
        ManifestRecord r = s;
        r.sample_id = id;
        r.augmented_from = s.sample_id;
        ids.insert(std::move(id));
        out.push_back(std::move(r));
        ++added;
      }
    }
    if (added < need) {
      fail(ErrorCode::kTargetUnreachable, "class " + std::to_string(label) +
                                              " ran out of unused (source, transform) pairs");
    }
  }
  return out;
}

// ---------------------------------------------------------------- splitting

namespace {

/// floor(total * f_i) plus largest-remainder rounding (ties to the earlier split).
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> fractions) {
  std::vector<std::size_t> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = static_cast<double>(total) * fractions[i];
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[i];
    remainders.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
  return counts;
}

}  // namespace

Manifest split(const Manifest& manifest, std::span<const double> fractions, std::uint64_t seed,
               SplitLevel level) {
  if (fractions.size() < 2 || fractions.size() > 3) {
    fail(ErrorCode::kBadFractions, "expected train,val[,test] fractions");
  }
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) fail(ErrorCode::kBadFractions, "fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    fail(ErrorCode::kBadFractions, "fractions sum to " + std::to_string(sum) + ", not 1");
  }
  static constexpr Split kOrder[] = {Split::kTrain, Split::kVal, Split::kTest};

  // Group records into units that must share a split, in first-seen order.
  std::vector<std::string> unit_keys;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& r = manifest[i];
    std::string key = level == SplitLevel::kSubject ? r.subject_id
                                                    : r.augmented_from.value_or(r.sample_id);
    auto [it, inserted] = members.try_emplace(key);
    if (inserted) unit_keys.push_back(key);
    it->second.push_back(i);
  }

  Manifest out = manifest;
  for (int label : {0, 1}) {
    std::vector<std::string> units;
    std::size_t records = 0;
    for (const auto& key : unit_keys) {
      const auto& idx = members[key];
      const auto positives = static_cast<std::size_t>(std::count_if(
          idx.begin(), idx.end(), [&](std::size_t i) { return manifest[i].label == 1; }));
      const int unit_label = 2 * positives >= idx.size() ? 1 : 0;
      if (unit_label != label) continue;
      units.push_back(key);
      records += idx.size();
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label) + 17));
    rng.shuffle(std::span<std::string>(units));

    const auto targets = apportion(records, fractions);
    std::vector<std::size_t> filled(fractions.size(), 0);
    for (const auto& key : units) {
      const auto& idx = members[key];
      std::size_t best = 0;
      long long best_deficit = std::numeric_limits<long long>::min();
      for (std::size_t s = 0; s < fractions.size(); ++s) {
        const long long deficit = static_cast<long long>(targets[s]) - static_cast<long long>(filled[s]);
        if (deficit > best_deficit) {
          best_deficit = deficit;
          best = s;
        }
      }
      filled[best] += idx.size();
      for (std::size_t i : idx) out[i].split = kOrder[best];
    }
  }
  return out;
}

}  // namespace gapnet::data
