#include "rbl/maskproc.hpp"

#include <algorithm>
#include <cmath>

namespace rbl {

namespace {

struct Box {
  int x0, y0, x1, y1;  // inclusive
};

std::optional<Box> foreground_box(const BinaryMask& m) {
  Box b{m.width(), m.height(), -1, -1};
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.get(x, y)) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  if (b.x1 < 0) return std::nullopt;
  return b;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + r];
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

BinaryMask smooth_binarize(const BinaryMask& mask, double sigma, double threshold) {
  if (sigma < 0.0 || !(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorKind::Precondition, "smooth_binarize needs sigma >= 0 and threshold in (0, 1)");
  }
  if (sigma == 0.0) return mask;
  const auto box = foreground_box(mask);
  BinaryMask out(mask.width(), mask.height());
  if (!box) return out;

  const std::vector<double> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  // Only pixels within r of the foreground can reach the threshold; outside that band the
  // field is zero, so edge replication at the crop border sees zeros as the full image would.
  const int x0 = std::max(0, box->x0 - r - 1), x1 = std::min(mask.width() - 1, box->x1 + r + 1);
  const int y0 = std::max(0, box->y0 - r - 1), y1 = std::min(mask.height() - 1, box->y1 + r + 1);
  const int cw = x1 - x0 + 1, ch = y1 - y0 + 1;
  auto sample = [&](int x, int y) {
    x = std::clamp(x, 0, mask.width() - 1);
    y = std::clamp(y, 0, mask.height() - 1);
    return mask.get(x, y) ? 1.0 : 0.0;
  };

  // Horizontal pass over the crop rows, reading replicated source pixels.
  std::vector<double> tmp(static_cast<std::size_t>(cw) * ch);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * sample(x + i, y);
      tmp[static_cast<std::size_t>(y - y0) * cw + (x - x0)] = acc;
    }
  }
  auto tmp_at = [&](int x, int y) {
    // vertical replication follows the full image edge; rows outside the crop are zero
    y = std::clamp(y, 0, mask.height() - 1);
    if (y < y0 || y > y1) return 0.0;
    return tmp[static_cast<std::size_t>(y - y0) * cw + (x - x0)];
  };
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp_at(x, y + i);
      if (acc >= threshold) out.set(x, y);
    }
  }
  return out;
}

BinaryMask remove_small_components(const BinaryMask& mask, std::size_t min_area_px, Connectivity connectivity) {
  if (min_area_px == 0) return mask;
  const ComponentLabels comps = label_components(mask, connectivity);
  BinaryMask out(mask.width(), mask.height());
  auto bits = out.bits();
  for (std::size_t i = 0; i < comps.labels.size(); ++i) {
    const int id = comps.labels[i];
    if (id > 0 && comps.sizes[id - 1] >= min_area_px) bits[i] = 1;
  }
  return out;
}

// ---- contours --------------------------------------------------------------

namespace {

// Clockwise neighbour order in image coordinates (y down), starting east.
constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

int direction_of(int dx, int dy) {
  for (int d = 0; d < 8; ++d) {
    if (kDx[d] == dx && kDy[d] == dy) return d;
  }
  return 0;
}

double shoelace_ydown(const std::vector<Pixel>& pts) {
  double twice = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    twice += static_cast<double>(pts[i].x) * pts[i + 1].y - static_cast<double>(pts[i + 1].x) * pts[i].y;
  }
  return twice;
}

}  // namespace

std::vector<Contour> extract_contours(const BinaryMask& mask) {
  // Suzuki-Abe border following on a zero-padded copy.
  const int w = mask.width() + 2;
  const int h = mask.height() + 2;
  std::vector<int> f(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) f[(y + 1) * w + (x + 1)] = mask.get(x, y) ? 1 : 0;
  }
  auto at = [&](int x, int y) -> int& { return f[static_cast<std::size_t>(y) * w + x]; };

  std::vector<Contour> out;
  int nbd = 1;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const int v = at(x, y);
      if (v == 0) continue;
      int from_x, from_y;
      ContourKind kind;
      if (v == 1 && at(x - 1, y) == 0) {
        kind = ContourKind::Outer;
        from_x = x - 1;
        from_y = y;
      } else if (v >= 1 && at(x + 1, y) == 0) {
        kind = ContourKind::Hole;
        from_x = x + 1;
        from_y = y;
      } else {
        continue;
      }
      ++nbd;
      Contour c;
      c.kind = kind;

      // 3.1: clockwise from (from) around (x, y) for a nonzero pixel
      const int d0 = direction_of(from_x - x, from_y - y);
      int found = -1;
      for (int k = 0; k < 8; ++k) {
        const int d = (d0 + k) % 8;
        if (at(x + kDx[d], y + kDy[d]) != 0) {
          found = d;
          break;
        }
      }
      if (found < 0) {
        at(x, y) = -nbd;
        c.points = {{x - 1, y - 1}, {x - 1, y - 1}};
        out.push_back(std::move(c));
        continue;
      }
      const int x1 = x + kDx[found], y1 = y + kDy[found];
      int x2 = x1, y2 = y1;
      int x3 = x, y3 = y;
      c.points.push_back({x - 1, y - 1});
      while (true) {
        // 3.3: counter-clockwise from the element after (x2, y2) around (x3, y3)
        const int dprev = direction_of(x2 - x3, y2 - y3);
        int x4 = x3, y4 = y3;
        bool east_zero_examined = false;
        for (int k = 1; k <= 8; ++k) {
          const int d = (dprev - k + 16) % 8;
          const int nx = x3 + kDx[d], ny = y3 + kDy[d];
          if (at(nx, ny) != 0) {
            x4 = nx;
            y4 = ny;
            break;
          }
          if (d == 0) east_zero_examined = true;
        }
        if (east_zero_examined) {
          at(x3, y3) = -nbd;
        } else if (at(x3, y3) == 1) {
          at(x3, y3) = nbd;
        }
        if (x4 == x && y4 == y && x3 == x1 && y3 == y1) break;
        x2 = x3;
        y2 = y3;
        x3 = x4;
        y3 = y4;
        c.points.push_back({x3 - 1, y3 - 1});
      }
      c.points.push_back(c.points.front());
      // Suzuki traces outer borders clockwise on screen; flip to the documented orientation.
      const double area = shoelace_ydown(c.points);
      const bool want_negative = kind == ContourKind::Outer;
      if ((want_negative && area > 0.0) || (!want_negative && area < 0.0)) {
        std::reverse(c.points.begin(), c.points.end());
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

BinaryMask contour_mask(const std::vector<Contour>& contours, int width, int height) {
  BinaryMask out(width, height);
  for (const auto& c : contours) {
    for (const auto& p : c.points) out.set(p.x, p.y);
  }
  return out;
}

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::Structural, "mask_and: dimension mismatch");
  BinaryMask out(a.width(), a.height());
  auto o = out.bits();
  auto x = a.bits();
  auto y = b.bits();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] & y[i];
  return out;
}

BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::Structural, "mask_or: dimension mismatch");
  BinaryMask out(a.width(), a.height());
  auto o = out.bits();
  auto x = a.bits();
  auto y = b.bits();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] | y[i];
  return out;
}

BinaryMask mask_not(const BinaryMask& a) {
  BinaryMask out(a.width(), a.height());
  auto o = out.bits();
  auto x = a.bits();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] ? 0 : 1;
  return out;
}

void check_params(const MaskProcParams& p) {
  if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma)) {
    throw Error(ErrorKind::Validation, "sigma must be finite and >= 0");
  }
  if (!(p.threshold > 0.0 && p.threshold < 1.0)) {
    throw Error(ErrorKind::Validation, "binarization threshold must lie in (0, 1)");
  }
}

ImageRecord postprocess_record(const ImageRecord& record, const MaskProcParams& params) {
  check_params(params);
  ImageRecord out = record;
  out.bone_mask = remove_small_components(smooth_binarize(record.bone_mask, params.sigma, params.threshold),
                                          params.min_area_bone);
  out.cej_mask = remove_small_components(record.cej_mask, params.min_area_cej);
  if (out.crown_margin_mask) out.crown_margin_mask = mask_and(*out.crown_margin_mask, out.cej_mask);

  ToothLabelMask labels(record.width(), record.height());
  auto dst = labels.labels();
  auto src = record.tooth_mask.labels();
  for (int label : record.tooth_mask.present_labels()) {
    const BinaryMask cleaned = remove_small_components(
        smooth_binarize(record.tooth_mask.region(label), params.sigma, params.threshold), params.min_area_tooth);
    auto bits = cleaned.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (!bits[i]) continue;
      // a pixel claimed by two labels keeps its original label, else the smaller one
      if (dst[i] == 0 || src[i] == label) dst[i] = static_cast<std::uint8_t>(label);
    }
  }
  out.tooth_mask = std::move(labels);
  return out;
}

}  // namespace rbl
