#include "rbl/overlay.hpp"

#include <cmath>
#include <cstdlib>

namespace rbl {

namespace {

constexpr int kS = kOverlayScale;

void put(png::Rgb8& img, int x, int y, const Rgb& c) {
  if (img.in_bounds(x, y)) img.put(x, y, c[0], c[1], c[2]);
}

void fill_block(png::Rgb8& img, int sx, int sy, const Rgb& c) {
  for (int dy = 0; dy < kS; ++dy) {
    for (int dx = 0; dx < kS; ++dx) put(img, sx * kS + dx, sy * kS + dy, c);
  }
}

void draw_outline(png::Rgb8& img, const BinaryMask& mask, const Rgb& c) {
  const BinaryMask edge = boundary_pixels(mask);
  for (int y = 0; y < edge.height(); ++y) {
    for (int x = 0; x < edge.width(); ++x) {
      if (edge.get(x, y)) fill_block(img, x, y, c);
    }
  }
}

// Bresenham between two overlay pixels.
void draw_line(png::Rgb8& img, Pixel a, Pixel b, const Rgb& c) {
  int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    put(img, a.x, a.y, c);
    if (a.x == b.x && a.y == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) err += dy, a.x += sx;
    if (e2 <= dx) err += dx, a.y += sy;
  }
}

void draw_marker(png::Rgb8& img, Pixel p, const Rgb& c) {
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) put(img, p.x + dx, p.y + dy, c);
  }
}

std::string site_name(const ToothAssessment& t, const SiteMeasurement& s) {
  return "tooth " + std::to_string(t.tooth.fdi_code()) + " " + to_string(s.image_side) + " site";
}

}  // namespace

Pixel overlay_anchor(const Point2& p) {
  return {static_cast<int>(std::floor(p.x)) * kS + kS / 2, static_cast<int>(std::floor(p.y)) * kS + kS / 2};
}

Overlay render_overlay(const ImageRecord& record, const std::vector<ToothAssessment>& teeth) {
  Overlay out;
  const int w = record.width(), h = record.height();
  out.image = png::Rgb8(w * kS, h * kS);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (record.tooth_mask.get(x, y) != 0) fill_block(out.image, x, y, palette::kToothFill);
      else if (record.bone_mask.get(x, y)) fill_block(out.image, x, y, palette::kBoneFill);
    }
  }
  draw_outline(out.image, record.bone_mask, palette::kBoneOutline);
  for (const auto& entry : record.tooth_table) {
    draw_outline(out.image, record.tooth_mask.region(entry.label), palette::kToothOutline);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (record.cej_mask.get(x, y)) fill_block(out.image, x, y, palette::kCejOutline);
    }
  }

  std::vector<const SiteMeasurement*> drawn;
  std::vector<const ToothAssessment*> owners;
  for (const auto& t : teeth) {
    if (!t.measurable()) {
      out.warnings.push_back("tooth " + std::to_string(t.tooth.fdi_code()) + " unmeasurable; not marked");
      continue;
    }
    for (const auto& s : t.sites) {
      if (s.usable() && s.cej_point && s.bone_point && s.apex_point) {
        drawn.push_back(&s);
        owners.push_back(&t);
      } else {
        out.warnings.push_back(site_name(t, s) + " unusable; not marked");
      }
    }
  }
  for (const auto* s : drawn) {
    draw_line(out.image, overlay_anchor(*s->cej_point), overlay_anchor(*s->apex_point), palette::kLine2);
  }
  for (const auto* s : drawn) {
    draw_line(out.image, overlay_anchor(*s->cej_point), overlay_anchor(*s->bone_point), palette::kLine1);
  }
  for (std::size_t i = 0; i < drawn.size(); ++i) {
    const auto& s = *drawn[i];
    const int fdi = owners[i]->tooth.fdi_code();
    const std::pair<const char*, std::pair<Point2, Rgb>> items[] = {
        {"apex", {*s.apex_point, palette::kApexPoint}},
        {"bone", {*s.bone_point, palette::kBonePoint}},
        {"cej", {*s.cej_point, palette::kCejPoint}},
    };
    for (const auto& [kind, pc] : items) {
      const Pixel a = overlay_anchor(pc.first);
      draw_marker(out.image, a, pc.second);
      out.markers.push_back({fdi, s.image_side, kind, a.x, a.y});
    }
  }
  return out;
}

}  // namespace rbl
