#include "rbl/mask.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "rbl/error.hpp"

namespace rbl {

namespace {

void check_dims(int width, int height, std::size_t n) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::Structural, "mask dimensions must be at least 1x1");
  }
  if (n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorKind::Structural, "mask buffer length does not match width x height");
  }
}

}  // namespace

BinaryMask::BinaryMask(int width, int height)
    : width_(width), height_(height) {
  check_dims(width, height, static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0));
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height, bits_.size());
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool BinaryMask::any() const {
  return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) != bits_.end();
}

ToothLabelMask::ToothLabelMask(int width, int height) : width_(width), height_(height) {
  check_dims(width, height, static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0));
  labels_.assign(static_cast<std::size_t>(width) * height, 0);
}

ToothLabelMask::ToothLabelMask(int width, int height, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  check_dims(width, height, labels_.size());
}

std::vector<int> ToothLabelMask::present_labels() const {
  std::array<bool, 256> seen{};
  for (auto v : labels_) seen[v] = true;
  std::vector<int> out;
  for (int k = 1; k < 256; ++k) {
    if (seen[k]) out.push_back(k);
  }
  return out;
}

BinaryMask ToothLabelMask::region(int label) const {
  BinaryMask m(width_, height_);
  auto bits = m.bits();
  for (std::size_t i = 0; i < labels_.size(); ++i) bits[i] = labels_[i] == label ? 1 : 0;
  return m;
}

BinaryMask ToothLabelMask::foreground() const {
  BinaryMask m(width_, height_);
  auto bits = m.bits();
  for (std::size_t i = 0; i < labels_.size(); ++i) bits[i] = labels_[i] != 0 ? 1 : 0;
  return m;
}

ComponentLabels label_components(const BinaryMask& mask, Connectivity connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  ComponentLabels out;
  out.labels.assign(mask.size(), 0);
  auto bits = mask.bits();
  std::vector<int> stack;
  static constexpr int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int nbrs = connectivity == Connectivity::Eight ? 8 : 4;

  for (int start = 0; start < static_cast<int>(bits.size()); ++start) {
    if (!bits[start] || out.labels[start] != 0) continue;
    const int id = out.count() + 1;
    std::size_t size = 0;
    out.labels[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      ++size;
      const int cx = cur % w;
      const int cy = cur / w;
      for (int k = 0; k < nbrs; ++k) {
        const int nx = cx + dx8[k];
        const int ny = cy + dy8[k];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int ni = ny * w + nx;
        if (bits[ni] && out.labels[ni] == 0) {
          out.labels[ni] = id;
          stack.push_back(ni);
        }
      }
    }
    out.sizes.push_back(size);
  }
  return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  const int w = mask.width();
  const int h = mask.height();
  // Separable max filter: rows then columns.
  BinaryMask rows(w, h);
  for (int y = 0; y < h; ++y) {
    int last = -1'000'000;
    // forward pass records distance to the nearest set pixel on the left
    std::vector<int> left(w), right(w);
    for (int x = 0; x < w; ++x) {
      if (mask.get(x, y)) last = x;
      left[x] = x - last;
    }
    last = 1'000'000;
    for (int x = w - 1; x >= 0; --x) {
      if (mask.get(x, y)) last = x;
      right[x] = last - x;
    }
    for (int x = 0; x < w; ++x) rows.set(x, y, left[x] <= radius || right[x] <= radius);
  }
  BinaryMask out(w, h);
  std::vector<int> up(h), down(h);
  for (int x = 0; x < w; ++x) {
    int last = -1'000'000;
    for (int y = 0; y < h; ++y) {
      if (rows.get(x, y)) last = y;
      up[y] = y - last;
    }
    last = 1'000'000;
    for (int y = h - 1; y >= 0; --y) {
      if (rows.get(x, y)) last = y;
      down[y] = last - y;
    }
    for (int y = 0; y < h; ++y) out.set(x, y, up[y] <= radius || down[y] <= radius);
  }
  return out;
}

BinaryMask dilate_disc(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  std::vector<Pixel> offsets;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) offsets.push_back({dx, dy});
    }
  }
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(x, y)) continue;
      for (const auto& o : offsets) {
        if (out.in_bounds(x + o.x, y + o.y)) out.set(x + o.x, y + o.y);
      }
    }
  }
  return out;
}

BinaryMask boundary_pixels(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.get(x, y)) continue;
      const bool edge = !mask.get_or_zero(x - 1, y) || !mask.get_or_zero(x + 1, y) ||
                        !mask.get_or_zero(x, y - 1) || !mask.get_or_zero(x, y + 1);
      if (edge) out.set(x, y);
    }
  }
  return out;
}

std::vector<Pixel> foreground_pixels(const BinaryMask& mask) {
  std::vector<Pixel> out;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.get(x, y)) out.push_back({x, y});
    }
  }
  return out;
}

}  // namespace rbl
