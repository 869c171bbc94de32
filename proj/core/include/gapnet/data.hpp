// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gapnet/tensor.hpp"

namespace gapnet::data {

// ---------------------------------------------------------------- images

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> px);
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill);

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary PGM (P5), maxval <= 255.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

/// Maps each level v to round(255 * (cdf(v) - cdf_min) / (1 - cdf_min)).
/// Constant images are returned unchanged.
GrayImage histogram_equalize(const GrayImage& img);

/// Bilinear resampling with half-pixel centres and clamped borders.
GrayImage resize_bilinear(const GrayImage& img, std::size_t out_w, std::size_t out_h);

/// v / 255 per pixel -> [H x W x 1].
Tensor normalize(const GrayImage& img);

/// [H x W x 1] -> [H x W x 3] with identical channels.
Tensor replicate_channels(const Tensor& t);

enum class Transform { kHFlip, kVFlip, kRot90, kRot180, kRot270 };
inline constexpr std::array<Transform, 5> kAllTransforms{
    Transform::kHFlip, Transform::kVFlip, Transform::kRot90, Transform::kRot180, Transform::kRot270};

std::string_view to_string(Transform t);
std::optional<Transform> parse_transform(std::string_view s);

/// Exact pixel permutation. ROT90/ROT270 (clockwise quarter turns) need a
/// square image.
GrayImage augment(const GrayImage& img, Transform t);

struct PreprocessOptions {
  std::size_t size = 224;
  bool equalize = true;
};

/// resize -> histogram equalisation -> normalise; returns [size x size x 1].
Tensor preprocess(const GrayImage& img, const PreprocessOptions& options = {});

// ---------------------------------------------------------------- manifest

enum class Plane { kAxial, kCoronal, kSagittal, kUnknown };
enum class Split { kTrain, kVal, kTest, kUnassigned };

std::string_view to_string(Plane p);
std::string_view to_string(Split s);
Plane parse_plane(std::string_view s);
Split parse_split(std::string_view s);

struct ManifestRecord {
  std::string sample_id;
  std::string path;
  int label = 0;  // 1 = tumor
  std::string subject_id;
  Plane plane = Plane::kUnknown;
  Split split = Split::kUnassigned;
  std::optional<std::string> augmented_from;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

using Manifest = std::vector<ManifestRecord>;

/// One flat JSON object per record, keys in the order: sample_id, path,
/// label, subject_id, plane, split[, augmented_from].
std::string encode_record(const ManifestRecord& r);
ManifestRecord decode_record(std::string_view line, std::size_t line_number);

Manifest parse_manifest(std::string_view text);
std::string serialize_manifest(const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Sample id of an augmented copy: "<source>@<transform>".
std::string augmented_id(std::string_view source_id, Transform t);
/// Transform encoded in an augmented sample id, if any.
std::optional<Transform> transform_of(const ManifestRecord& r);

std::size_t count_label(const Manifest& manifest, int label);
std::size_t count_split(const Manifest& manifest, Split split);

/// Tops up every class holding fewer than `target` records with augmented
/// copies of its original records. (source, transform) pairs are drawn in a
/// seed-determined order and none repeats. Originals are never modified.
Manifest balance_classes(const Manifest& manifest, std::size_t target, std::uint64_t seed);

enum class SplitLevel { kSample, kSubject };

/// Label-stratified split into train/val[/test]. Subject level keeps every
/// subject in a single split; sample level keeps augmented copies with their
/// source record.
Manifest split(const Manifest& manifest, std::span<const double> fractions, std::uint64_t seed,
               SplitLevel level);

// ---------------------------------------------------------------- synthetic data

struct SyntheticOptions {
  std::size_t count = 400;
  std::size_t size = 224;
  std::size_t slices_per_subject = 4;
  std::uint64_t seed = 0;
};

struct SyntheticSample {
  ManifestRecord record;
  GrayImage image;
};

/// Noisy backgrounds; label-1 images additionally carry one bright blob.
/// Classes alternate by subject so the set is balanced.
std::vector<SyntheticSample> make_synthetic_dataset(const SyntheticOptions& options);

}  // namespace gapnet::data
