// SPDX-License-Identifier: Apache-2.0
#include "mctk/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "mctk/container.hpp"

namespace mctk {

std::uint8_t quantize_unit(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

PixelImage rgb_image(const Tensor& pixels) {
  if (pixels.rank() != 3 || pixels.dim(2) != 3) {
    throw ShapeError("rgb_image: expected [H x W x 3], got " + shape_to_string(pixels.shape()));
  }
  PixelImage img{pixels.dim(1), pixels.dim(0), 3, std::vector<std::uint8_t>(pixels.size())};
  for (std::size_t i = 0; i < pixels.size(); ++i) img.bytes[i] = quantize_unit(pixels[i]);
  return img;
}

PixelImage gray_image(const Tensor& pixels) {
  if (pixels.rank() != 2) throw ShapeError("gray_image: expected [H x W], got " + shape_to_string(pixels.shape()));
  PixelImage img{pixels.dim(1), pixels.dim(0), 1, std::vector<std::uint8_t>(pixels.size())};
  for (std::size_t i = 0; i < pixels.size(); ++i) img.bytes[i] = quantize_unit(pixels[i]);
  return img;
}

Tensor image_to_planar(const PixelImage& image) {
  const std::size_t h = image.height, w = image.width, ch = image.channels;
  Tensor out({3, h, w});
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t src_c = ch == 1 ? 0 : c;
    for (std::size_t i = 0; i < h * w; ++i) out[c * h * w + i] = static_cast<float>(image.bytes[i * ch + src_c]) / 255.0f;
  }
  return out;
}

PixelImage planar_to_image(const Tensor& planar) {
  if (planar.rank() != 3 || planar.dim(0) != 3) {
    throw ShapeError("planar_to_image: expected [3 x H x W], got " + shape_to_string(planar.shape()));
  }
  const std::size_t h = planar.dim(1), w = planar.dim(2);
  PixelImage img{w, h, 3, std::vector<std::uint8_t>(3 * h * w)};
  for (std::size_t i = 0; i < h * w; ++i)
    for (std::size_t c = 0; c < 3; ++c) img.bytes[i * 3 + c] = quantize_unit(planar[c * h * w + i]);
  return img;
}

std::vector<std::uint8_t> encode_pnm(const PixelImage& image) {
  if (image.channels != 1 && image.channels != 3) throw ArgumentError("encode_pnm: channels must be 1 or 3");
  if (image.bytes.size() != image.width * image.height * image.channels) {
    throw ShapeError("encode_pnm: byte count does not match image dimensions");
  }
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(image.width) +
                             " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.bytes.begin(), image.bytes.end());
  return out;
}

namespace {

class HeaderScanner {
 public:
  explicit HeaderScanner(std::span<const std::uint8_t> b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      if (v > (1u << 24)) throw FormatError(std::string("pnm ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("pnm: expected ") + what, start);
    return v;
  }

  std::size_t pos_ = 0;

 private:
  std::span<const std::uint8_t> b_;
};

}  // namespace

PixelImage decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("pnm: expected P5 or P6 magic", 0);
  }
  PixelImage img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  HeaderScanner s(bytes);
  s.pos_ = 2;
  img.width = s.number("width");
  img.height = s.number("height");
  const std::size_t maxval_at = s.pos_;
  const std::size_t maxval = s.number("maxval");
  if (img.width == 0 || img.height == 0) throw FormatError("pnm: zero image dimension", maxval_at);
  if (maxval != 255) throw FormatError("pnm: only maxval 255 is supported", maxval_at);
  if (s.pos_ >= bytes.size() || !std::isspace(bytes[s.pos_])) {
    throw FormatError("pnm: missing whitespace after header", s.pos_);
  }
  ++s.pos_;
  const std::size_t need = img.width * img.height * img.channels;
  if (bytes.size() - s.pos_ < need) throw FormatError("pnm: truncated pixel data", bytes.size());
  if (bytes.size() - s.pos_ > need) throw FormatError("pnm: trailing bytes after pixel data", s.pos_ + need);
  img.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(s.pos_), bytes.end());
  return img;
}

void write_pnm(const std::filesystem::path& path, const PixelImage& image) {
  write_file_atomic(path, encode_pnm(image));
}

PixelImage read_pnm(const std::filesystem::path& path) { return decode_pnm(read_file_bytes(path)); }

}  // namespace mctk
