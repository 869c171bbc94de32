// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gapnet/data.hpp"
#include "gapnet/rng.hpp"

namespace gapnet::data {

namespace {

GrayImage render(std::size_t size, bool blob, Rng& rng) {
  const double base = rng.uniform(70.0, 110.0);
  const double noise = rng.uniform(12.0, 22.0);
  // Low-frequency shading so the blob-free class is not a flat field.
  const double gx = rng.uniform(-20.0, 20.0), gy = rng.uniform(-20.0, 20.0);

  double cx = 0, cy = 0, radius = 0, amplitude = 0;
  if (blob) {
    const double margin = 0.2 * static_cast<double>(size);
    cx = rng.uniform(margin, static_cast<double>(size) - margin);
    cy = rng.uniform(margin, static_cast<double>(size) - margin);
    radius = rng.uniform(0.12, 0.18) * static_cast<double>(size);
    amplitude = rng.uniform(110.0, 150.0);
  }

  GrayImage img(size, size, std::uint8_t{0});
  const double inv = 1.0 / static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      double v = base + gx * (static_cast<double>(x) * inv - 0.5) +
                 gy * (static_cast<double>(y) * inv - 0.5) + noise * rng.normal();
      if (blob) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        v += amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius));
      }
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

}  // namespace

std::vector<SyntheticSample> make_synthetic_dataset(const SyntheticOptions& options) {
  if (options.count == 0 || options.size == 0 || options.slices_per_subject == 0) {
    fail(ErrorCode::kInvalidExtent, "synthetic dataset extents must be positive");
  }
  static constexpr Plane kPlanes[] = {Plane::kAxial, Plane::kCoronal, Plane::kSagittal};
  std::vector<SyntheticSample> out;
  out.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    const std::size_t subject = i / options.slices_per_subject;
    const int label = static_cast<int>(subject % 2);
    Rng rng(derive_seed(options.seed, i));
    char id[32], subj[32];
    std::snprintf(id, sizeof id, "syn%05zu", i);
    std::snprintf(subj, sizeof subj, "subj%04zu", subject);
    ManifestRecord r;
    r.sample_id = id;
    r.path = std::string(id) + ".pgm";
    r.label = label;
    r.subject_id = subj;
    r.plane = kPlanes[i % 3];
    out.push_back({std::move(r), render(options.size, label == 1, rng)});
  }
  return out;
}

}  // namespace gapnet::data
