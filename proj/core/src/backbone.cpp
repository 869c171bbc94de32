// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "gapnet/backbone.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace gapnet::backbone {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

}  // namespace

std::size_t tensor_header_size(std::size_t rank) { return 4 + 4 + 1 + 1 + 4 * rank; }

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.rank() > 255) fail(ErrorCode::kRankError, "TensorFile rank is limited to 255");
  std::vector<std::uint8_t> out;
  out.reserve(tensor_header_size(t.rank()) + 4 * t.size());
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  put_u32(out, kTensorVersion);
  out.push_back(kDtypeF32);
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (auto e : t.shape()) {
    if (e > UINT32_MAX) fail(ErrorCode::kShapeMismatch, "extent exceeds u32 range");
    put_u32(out, static_cast<std::uint32_t>(e));
  }
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "missing BTFT magic");
  }
  if (bytes.size() < tensor_header_size(0)) {
    fail(ErrorCode::kTruncatedPayload, "header shorter than fixed fields");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kTensorVersion) {
    fail(ErrorCode::kUnsupportedVersion, "TensorFile version " + std::to_string(version));
  }
  const std::uint8_t dtype = bytes[8];
  if (dtype != kDtypeF32) fail(ErrorCode::kUnsupportedDtype, "dtype code " + std::to_string(dtype));
  const std::size_t rank = bytes[9];
  if (rank == 0) fail(ErrorCode::kRankError, "TensorFile rank must be at least 1");
  const std::size_t header = tensor_header_size(rank);
  if (bytes.size() < header) fail(ErrorCode::kTruncatedPayload, "header extents truncated");

  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = get_u32(bytes, 10 + 4 * i);
    if (shape[i] == 0) fail(ErrorCode::kShapeMismatch, "zero extent in TensorFile header");
  }
  const std::size_t count = shape_size(shape);
  const std::size_t payload = bytes.size() - header;
  if (payload != 4 * count) {
    fail(ErrorCode::kTruncatedPayload, "header " + shape_to_string(shape) + " needs " +
                                           std::to_string(4 * count) + " payload bytes, found " +
                                           std::to_string(payload));
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoFailure, "write failed for " + path.string());
}

Tensor load_feature_map(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kMissingResource, path.string() + " does not exist");
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

nn::Sequential<float> make_toy_backbone(const ToyBackboneConfig& config, Rng& rng) {
  nn::Sequential<float> net;
  net.emplace<nn::Conv2dLayer<float>>(config.in_channels, config.mid_channels, config.kernel_size,
                                      config.stride, rng);
  net.emplace<nn::ReluLayer<float>>();
  net.emplace<nn::Conv2dLayer<float>>(config.mid_channels, config.out_channels,
                                      config.kernel_size, config.stride, rng);
  net.emplace<nn::ReluLayer<float>>();
  return net;
}

Shape toy_backbone_output_shape(const ToyBackboneConfig& config, const Shape& input) {
  if (input.size() != 3) fail(ErrorCode::kRankError, "toy backbone expects [H x W x C] input");
  if (input[2] != config.in_channels) {
    fail(ErrorCode::kShapeMismatch, "toy backbone expects " + std::to_string(config.in_channels) +
                                        " input channels, got " + std::to_string(input[2]));
  }
  std::size_t h = input[0], w = input[1];
  for (int stage = 0; stage < 2; ++stage) {
    h = conv_output_extent(h, config.kernel_size, config.stride);
    w = conv_output_extent(w, config.kernel_size, config.stride);
  }
  return {h, w, config.out_channels};
}

Tensor toy_backbone_forward(nn::Sequential<float>& backbone, const Tensor& image, nn::Mode mode) {
  if (image.rank() != 3) fail(ErrorCode::kShapeMismatch, "toy backbone expects an [H x W x C] image");
  return backbone.forward(image, mode);
}

std::filesystem::path ImportedFeatures::path_for(const std::string& sample_id) const {
  return directory_ / (sample_id + kTensorExtension);
}

Tensor ImportedFeatures::load(const std::string& sample_id) {
  Tensor t = load_feature_map(path_for(sample_id));
  if (t.rank() != 3) {
    fail(ErrorCode::kRankError, "imported feature map for " + sample_id + " is " +
                                    shape_to_string(t.shape()) + ", expected [H x W x C]");
  }
  if (shape_ && *shape_ != t.shape()) {
    fail(ErrorCode::kShapeMismatch, "feature map for " + sample_id + " is " +
                                        shape_to_string(t.shape()) + ", dataset uses " +
                                        shape_to_string(*shape_));
  }
  shape_ = t.shape();
  return t;
}

}  // namespace gapnet::backbone
