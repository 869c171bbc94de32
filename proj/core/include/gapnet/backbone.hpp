// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gapnet/nn.hpp"
#include "gapnet/tensor.hpp"

namespace gapnet::backbone {

// TensorFile layout, all integers little-endian:
//   magic   "BTFT"         4 bytes
//   version u32            currently 1
//   dtype   u8             1 = f32
//   rank    u8
//   extents u32 x rank
//   payload f32 x product(extents), row-major
inline constexpr char kTensorMagic[4] = {'B', 'T', 'F', 'T'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr const char* kTensorExtension = ".btft";

std::size_t tensor_header_size(std::size_t rank);

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_feature_map(const std::filesystem::path& path);

/// Two conv2d(5x5, stride 2) + ReLU stages: 3 -> 8 -> 16 channels.
/// A 224 x 224 x 3 image maps to 53 x 53 x 16.
struct ToyBackboneConfig {
  std::size_t in_channels = 3;
  std::size_t mid_channels = 8;
  std::size_t out_channels = 16;
  std::size_t kernel_size = 5;
  std::size_t stride = 2;
};

nn::Sequential<float> make_toy_backbone(const ToyBackboneConfig& config, Rng& rng);

/// [H x W x Cin] -> [H' x W' x Cout] by the valid-convolution extent formula.
Shape toy_backbone_output_shape(const ToyBackboneConfig& config, const Shape& input);

Tensor toy_backbone_forward(nn::Sequential<float>& backbone, const Tensor& image,
                            nn::Mode mode = nn::Mode::kEval);

/// Frozen pre-extracted feature maps stored as `<directory>/<sample_id>.btft`.
/// Every map served from one source must share a single [H x W x C] shape.
class ImportedFeatures {
 public:
  explicit ImportedFeatures(std::filesystem::path directory) : directory_(std::move(directory)) {}

  Tensor load(const std::string& sample_id);
  std::filesystem::path path_for(const std::string& sample_id) const;
  const std::optional<Shape>& shape() const { return shape_; }

 private:
  std::filesystem::path directory_;
  std::optional<Shape> shape_;
};

}  // namespace gapnet::backbone
