// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mvp {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h * 3, fill) {}
  std::uint8_t* at(std::size_t row, std::size_t col) { return pixels.data() + (row * width + col) * 3; }
  const std::uint8_t* at(std::size_t row, std::size_t col) const { return pixels.data() + (row * width + col) * 3; }
};

/// Throws IoError when the file cannot be written.
void write_png(const std::filesystem::path& path, const RgbImage& image);
/// Reads 8-bit gray, RGB, or RGBA PNGs as RGB. Throws IoError on failure.
RgbImage read_png(const std::filesystem::path& path);

}  // namespace mvp
