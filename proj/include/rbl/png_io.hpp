#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rbl/mask.hpp"

namespace rbl::png {

struct Gray8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

struct Rgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // r,g,b interleaved, row-major

  Rgb8() = default;
  Rgb8(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}
  void put(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
};

// Reads any 8-bit PNG and reduces it to one channel (first channel for colour input).
Gray8 read_gray(const std::filesystem::path& path);
void write_gray(const std::filesystem::path& path, const Gray8& image);
void write_rgb(const std::filesystem::path& path, const Rgb8& image);
Rgb8 read_rgb(const std::filesystem::path& path);

// 0 is background, anything else foreground.
BinaryMask read_binary_mask(const std::filesystem::path& path);
// Foreground written as 255.
void write_binary_mask(const std::filesystem::path& path, const BinaryMask& mask);
ToothLabelMask read_label_mask(const std::filesystem::path& path);
void write_label_mask(const std::filesystem::path& path, const ToothLabelMask& mask);

}  // namespace rbl::png
