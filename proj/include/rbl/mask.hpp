#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rbl {

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// Row-major {0,1} raster. Width and height are at least 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool get(int x, int y) const { return bits_[index(x, y)] != 0; }
  // Out-of-range reads are background.
  bool get_or_zero(int x, int y) const { return in_bounds(x, y) && get(x, y); }
  void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }

  std::size_t count() const;
  bool any() const;
  bool same_shape(const BinaryMask& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Per-pixel tooth instance labels: 0 is background, k > 0 is tooth instance k.
class ToothLabelMask {
 public:
  ToothLabelMask() = default;
  ToothLabelMask(int width, int height);
  ToothLabelMask(int width, int height, std::vector<std::uint8_t> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::uint8_t get(int x, int y) const { return labels_[index(x, y)]; }
  void set(int x, int y, std::uint8_t label) { labels_[index(x, y)] = label; }

  std::span<const std::uint8_t> labels() const { return labels_; }
  std::span<std::uint8_t> labels() { return labels_; }

  // Sorted distinct nonzero labels.
  std::vector<int> present_labels() const;
  BinaryMask region(int label) const;
  // Any nonzero label.
  BinaryMask foreground() const;

  friend bool operator==(const ToothLabelMask&, const ToothLabelMask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> labels_;
};

enum class Connectivity { Four = 4, Eight = 8 };

struct ComponentLabels {
  std::vector<int> labels;          // 0 background, 1..n component ids, row-major
  std::vector<std::size_t> sizes;   // sizes[k-1] is the pixel count of component k
  int count() const { return static_cast<int>(sizes.size()); }
};

// Components are numbered in raster order of their first pixel.
ComponentLabels label_components(const BinaryMask& mask, Connectivity connectivity);

// Chebyshev dilation with a (2r+1) x (2r+1) square.
BinaryMask dilate(const BinaryMask& mask, int radius);
// Euclidean dilation: every pixel within distance r of the mask (a plus sign for r = 1).
BinaryMask dilate_disc(const BinaryMask& mask, int radius);

// Foreground pixels with at least one background 4-neighbour or lying on the image edge.
BinaryMask boundary_pixels(const BinaryMask& mask);

std::vector<Pixel> foreground_pixels(const BinaryMask& mask);

}  // namespace rbl
