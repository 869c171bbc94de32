// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "gapnet/data.hpp"

namespace gapnet::data {

GrayImage::GrayImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> px)
    : width(w), height(h), pixels(std::move(px)) {
  if (w == 0 || h == 0) fail(ErrorCode::kEmptyImage, "image extents must be positive");
  if (pixels.size() != w * h) {
    fail(ErrorCode::kShapeMismatch, std::to_string(pixels.size()) + " pixels for a " +
                                        std::to_string(w) + "x" + std::to_string(h) + " image");
  }
}

GrayImage::GrayImage(std::size_t w, std::size_t h, std::uint8_t fill)
    : GrayImage(w, h, std::vector<std::uint8_t>(w * h, fill)) {}

// ---------------------------------------------------------------- PGM

namespace {

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t next_number(const std::string& what) {
    skip_space_and_comments();
    std::size_t v = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      any = true;
    }
    if (!any) fail(ErrorCode::kParseError, "PGM header: expected " + what);
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingResource, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    fail(ErrorCode::kParseError, path.string() + " is not a binary PGM (P5)");
  }
  PgmHeaderReader reader(bytes);
  const std::size_t w = reader.next_number("width");
  const std::size_t h = reader.next_number("height");
  const std::size_t maxval = reader.next_number("maxval");
  if (maxval == 0 || maxval > 255) {
    fail(ErrorCode::kParseError, path.string() + ": only 8-bit PGM is supported");
  }
  reader.advance();  // single whitespace byte before the raster
  if (w == 0 || h == 0) fail(ErrorCode::kEmptyImage, path.string() + " has zero extent");
  if (bytes.size() < reader.pos() + w * h) {
    fail(ErrorCode::kTruncatedPayload, path.string() + ": raster shorter than " +
                                           std::to_string(w * h) + " bytes");
  }
  std::vector<std::uint8_t> px(bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos()),
                               bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos() + w * h));
  if (maxval != 255) {
    for (auto& v : px) v = static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
  }
  return GrayImage(w, h, std::move(px));
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) fail(ErrorCode::kIoFailure, "write failed for " + path.string());
}

// ---------------------------------------------------------------- point ops

GrayImage histogram_equalize(const GrayImage& img) {
  if (img.pixels.empty()) fail(ErrorCode::kEmptyImage, "cannot equalize an empty image");
  std::array<std::size_t, 256> hist{};
  for (auto v : img.pixels) ++hist[v];
  const std::size_t n = img.pixels.size();

  std::array<std::size_t, 256> cum{};
  std::size_t running = 0;
  for (std::size_t v = 0; v < 256; ++v) cum[v] = running += hist[v];
  const auto first = static_cast<std::size_t>(
      std::find_if(hist.begin(), hist.end(), [](std::size_t c) { return c > 0; }) - hist.begin());
  const std::size_t cum_min = cum[first];
  if (cum_min == n) return img;  // single intensity level

  // round(255 * (cum - cum_min) / (n - cum_min)), half away from zero, in integers.
  std::array<std::uint8_t, 256> lut{};
  const std::size_t den = n - cum_min;
  for (std::size_t v = 0; v < 256; ++v) {
    const std::size_t num = cum[v] >= cum_min ? cum[v] - cum_min : 0;
    lut[v] = static_cast<std::uint8_t>((2 * 255 * num + den) / (2 * den));
  }
  GrayImage out = img;
  for (auto& v : out.pixels) v = lut[v];
  return out;
}

GrayImage resize_bilinear(const GrayImage& img, std::size_t out_w, std::size_t out_h) {
  if (out_w == 0 || out_h == 0) fail(ErrorCode::kInvalidExtent, "resize target must be positive");
  if (img.pixels.empty()) fail(ErrorCode::kEmptyImage, "cannot resize an empty image");
  if (out_w == img.width && out_h == img.height) return img;

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(s);
      t[i] = {lo, std::min(lo + 1, in - 1), s - static_cast<double>(lo)};
    }
    return t;
  };
  const auto xs = taps(img.width, out_w);
  const auto ys = taps(img.height, out_h);

  GrayImage out(out_w, out_h, std::uint8_t{0});
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto& ty = ys[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto& tx = xs[x];
      const double top = img.at(tx.lo, ty.lo) * (1.0 - tx.frac) + img.at(tx.hi, ty.lo) * tx.frac;
      const double bottom = img.at(tx.lo, ty.hi) * (1.0 - tx.frac) + img.at(tx.hi, ty.hi) * tx.frac;
      const double v = top * (1.0 - ty.frac) + bottom * ty.frac;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

Tensor normalize(const GrayImage& img) {
  if (img.pixels.empty()) fail(ErrorCode::kEmptyImage, "cannot normalize an empty image");
  std::vector<float> v(img.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(img.pixels[i] / 255.0);
  return Tensor({img.height, img.width, 1}, std::move(v));
}

Tensor replicate_channels(const Tensor& t) {
  if (t.rank() != 3 || t.extent(2) != 1) {
    fail(ErrorCode::kShapeMismatch, "replicate_channels expects [H x W x 1], got " +
                                        shape_to_string(t.shape()));
  }
  const std::size_t n = t.extent(0) * t.extent(1);
  Tensor out({t.extent(0), t.extent(1), 3});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[i * 3 + c] = t[i];
  }
  return out;
}

// ---------------------------------------------------------------- augmentation

std::string_view to_string(Transform t) {
  switch (t) {
    case Transform::kHFlip: return "hflip";
    case Transform::kVFlip: return "vflip";
    case Transform::kRot90: return "rot90";
    case Transform::kRot180: return "rot180";
    case Transform::kRot270: return "rot270";
  }
  return "hflip";
}

std::optional<Transform> parse_transform(std::string_view s) {
  for (auto t : kAllTransforms) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

GrayImage augment(const GrayImage& img, Transform t) {
  const std::size_t w = img.width, h = img.height;
  if ((t == Transform::kRot90 || t == Transform::kRot270) && w != h) {
    fail(ErrorCode::kNonSquareRotation, "quarter-turn rotation needs a square image, got " +
                                            std::to_string(w) + "x" + std::to_string(h));
  }
  GrayImage out = img;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      switch (t) {
        case Transform::kHFlip: v = img.at(w - 1 - x, y); break;
        case Transform::kVFlip: v = img.at(x, h - 1 - y); break;
        case Transform::kRot90: v = img.at(y, w - 1 - x); break;  // clockwise
        case Transform::kRot180: v = img.at(w - 1 - x, h - 1 - y); break;
        case Transform::kRot270: v = img.at(w - 1 - y, x); break;
      }
      out.at(x, y) = v;
    }
  }
  return out;
}

Tensor preprocess(const GrayImage& img, const PreprocessOptions& options) {
  GrayImage resized = resize_bilinear(img, options.size, options.size);
  if (options.equalize) resized = histogram_equalize(resized);
  return normalize(resized);
}

}  // namespace gapnet::data
