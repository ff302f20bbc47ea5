// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary portable pixmaps: P6 (RGB) and P5 (gray), maxval 255.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mctk/tensor.hpp"

namespace mctk {

struct PixelImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;  // 3 = P6, 1 = P5
  std::vector<std::uint8_t> bytes;  // interleaved, row-major

  bool operator==(const PixelImage&) const = default;
};

/// round(clamp(v, 0, 1) * 255).
std::uint8_t quantize_unit(float v);

/// [H x W x 3] -> P6 image.
PixelImage rgb_image(const Tensor& pixels);
/// [H x W] -> P5 image.
PixelImage gray_image(const Tensor& pixels);

/// Image as [3 x H x W] floats in [0, 1]; gray images are replicated to 3 channels.
Tensor image_to_planar(const PixelImage& image);
/// [3 x H x W] floats -> P6 image.
PixelImage planar_to_image(const Tensor& planar);

std::vector<std::uint8_t> encode_pnm(const PixelImage& image);
/// Throws FormatError with the byte offset of the first problem.
PixelImage decode_pnm(std::span<const std::uint8_t> bytes);

void write_pnm(const std::filesystem::path& path, const PixelImage& image);
PixelImage read_pnm(const std::filesystem::path& path);

}  // namespace mctk
