#include "rbl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rbl/maskproc.hpp"

namespace rbl {

AxisOutcome tooth_axis(std::span<const Pixel> tooth_pixels, std::span<const Point2> cej_points,
                       const GeometryParams& params, std::span<const Point2> bone_points) {
  AxisOutcome out;
  if (tooth_pixels.size() < params.min_tooth_px) {
    out.reason = reason::kToothTooSmall;
    return out;
  }
  if (cej_points.empty()) {
    out.reason = reason::kNoCej;
    return out;
  }
  const double n = static_cast<double>(tooth_pixels.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : tooth_pixels) {
    mx += p.x + 0.5;
    my += p.y + 0.5;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : tooth_pixels) {
    const double dx = p.x + 0.5 - mx, dy = p.y + 0.5 - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  sxx /= n;
  sxy /= n;
  syy /= n;
  const double half_tr = 0.5 * (sxx + syy);
  const double disc = std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
  const double l1 = half_tr + disc, l2 = half_tr - disc;
  const double ratio = l2 > 0.0 ? l1 / l2 : std::numeric_limits<double>::infinity();
  if (!(ratio >= params.min_eigen_ratio)) {
    out.reason = reason::kAxisUndefined;
    return out;
  }
  Point2 d;
  if (sxy != 0.0) {
    d = {l1 - syy, sxy};
  } else {
    d = sxx >= syy ? Point2{1.0, 0.0} : Point2{0.0, 1.0};
  }
  d = d * (1.0 / d.norm());

  ToothAxis axis;
  axis.centroid = {mx, my};
  axis.direction = d;
  axis.eigen_ratio = ratio;
  double mean_cej = 0.0;
  for (const auto& c : cej_points) mean_cej += axis.along(c);
  mean_cej /= static_cast<double>(cej_points.size());
  // The crown can outweigh the root, putting the CEJ near the centroid; bone sits
  // around the root, which makes it the sturdier cue.
  double flip = mean_cej;
  if (!bone_points.empty()) {
    double mean_bone = 0.0;
    for (const auto& b : bone_points) mean_bone += axis.along(b);
    mean_bone /= static_cast<double>(bone_points.size());
    if (mean_bone != mean_cej) flip = mean_cej - mean_bone;
  }
  if (flip > 0.0) axis.direction = d * -1.0;
  Point2 nrm{-axis.direction.y, axis.direction.x};
  if (nrm.x < 0.0 || (nrm.x == 0.0 && nrm.y < 0.0)) nrm = nrm * -1.0;
  axis.normal = nrm;

  axis.coronal_end = std::numeric_limits<double>::infinity();
  axis.apical_end = -std::numeric_limits<double>::infinity();
  for (const auto& p : tooth_pixels) {
    const double u = axis.along(pixel_center(p));
    axis.coronal_end = std::min(axis.coronal_end, u);
    axis.apical_end = std::max(axis.apical_end, u);
  }
  out.axis = axis;
  return out;
}

namespace {

struct Crop {
  int x0 = 0, y0 = 0, w = 0, h = 0;
};

BinaryMask crop_mask(const BinaryMask& m, const Crop& c) {
  BinaryMask out(c.w, c.h);
  for (int y = 0; y < c.h; ++y) {
    for (int x = 0; x < c.w; ++x) {
      if (m.get(c.x0 + x, c.y0 + y)) out.set(x, y);
    }
  }
  return out;
}

// Most coronal candidate per side; ties by x then y. Candidates on the axis count for both.
SidePair select_most_coronal(const BinaryMask& candidates, Pixel origin, const ToothAxis& axis) {
  struct Best {
    bool set = false;
    double u = 0.0;
    Pixel p;
  };
  Best left, right;
  auto offer = [](Best& b, double u, Pixel p) {
    if (!b.set || u < b.u || (u == b.u && (p.x < b.p.x || (p.x == b.p.x && p.y < b.p.y)))) {
      b = {true, u, p};
    }
  };
  for (int y = 0; y < candidates.height(); ++y) {
    for (int x = 0; x < candidates.width(); ++x) {
      if (!candidates.get(x, y)) continue;
      const Pixel p{x + origin.x, y + origin.y};
      const Point2 c = pixel_center(p);
      const double u = axis.along(c), v = axis.across(c);
      if (v <= 0.0) offer(left, u, p);
      if (v >= 0.0) offer(right, u, p);
    }
  }
  SidePair out;
  if (left.set) out.left = pixel_center(left.p);
  if (right.set) out.right = pixel_center(right.p);
  return out;
}

// Curve pixels touching the tooth band win; the dilated curve only fills a side they miss.
SidePair select_tiered(const BinaryMask& direct, const BinaryMask& bridged, Pixel origin, const ToothAxis& axis) {
  SidePair a = select_most_coronal(direct, origin, axis);
  if (a.left && a.right) return a;
  const SidePair b = select_most_coronal(bridged, origin, axis);
  if (!a.left) a.left = b.left;
  if (!a.right) a.right = b.right;
  return a;
}

struct ApexPixels {
  std::optional<Pixel> left, right;
};

ApexPixels find_apex_pixels(const BinaryMask& region, Pixel origin, const ToothAxis& axis) {
  struct Best {
    bool set = false;
    double u = 0.0, av = 0.0;
    Pixel p;
  };
  Best left, right;
  auto offer = [](Best& b, double u, double av, Pixel p) {
    bool better = !b.set || u > b.u;
    if (b.set && u == b.u) {
      better = av < b.av || (av == b.av && (p.x < b.p.x || (p.x == b.p.x && p.y < b.p.y)));
    }
    if (better) b = {true, u, av, p};
  };
  for (int y = 0; y < region.height(); ++y) {
    for (int x = 0; x < region.width(); ++x) {
      if (!region.get(x, y)) continue;
      const Pixel p{x + origin.x, y + origin.y};
      const Point2 c = pixel_center(p);
      const double u = axis.along(c);
      if (u <= 0.0) continue;
      const double v = axis.across(c);
      if (v <= 0.0) offer(left, u, std::abs(v), p);
      if (v >= 0.0) offer(right, u, std::abs(v), p);
    }
  }
  ApexPixels out;
  if (left.set) out.left = left.p;
  if (right.set) out.right = right.p;
  return out;
}

std::optional<Apices> apices_from(const ApexPixels& px, int width, int height) {
  if (!px.left && !px.right) return std::nullopt;
  auto on_border = [&](const Pixel& p) { return p.x == 0 || p.y == 0 || p.x == width - 1 || p.y == height - 1; };
  Apices a;
  const Pixel l = px.left ? *px.left : *px.right;
  const Pixel r = px.right ? *px.right : *px.left;
  a.left = pixel_center(l);
  a.right = pixel_center(r);
  a.left_fallback = !px.left;
  a.right_fallback = !px.right;
  a.left_at_border = on_border(l);
  a.right_at_border = on_border(r);
  return a;
}

}  // namespace

SidePair curve_intersections(const BinaryMask& curve, const BinaryMask& tooth_region, const ToothAxis& axis,
                             int band_px) {
  const BinaryMask band = dilate_disc(boundary_pixels(tooth_region), band_px);
  return select_tiered(mask_and(curve, band), mask_and(dilate_disc(curve, band_px), band), {0, 0}, axis);
}

SidePair bone_intersections(const BinaryMask& bone_mask, const BinaryMask& tooth_region, const ToothAxis& axis,
                            int band_px) {
  const BinaryMask contour = contour_mask(extract_contours(bone_mask), bone_mask.width(), bone_mask.height());
  return curve_intersections(contour, tooth_region, axis, band_px);
}

SidePair cej_intersections(const BinaryMask& cej_mask, const BinaryMask& tooth_region, const ToothAxis& axis,
                           int band_px) {
  return curve_intersections(cej_mask, tooth_region, axis, band_px);
}

std::optional<Apices> locate_root_apices(const BinaryMask& tooth_region, const ToothAxis& axis) {
  return apices_from(find_apex_pixels(tooth_region, {0, 0}, axis), tooth_region.width(), tooth_region.height());
}

SiteMeasurement measure_site(const Point2& cej, const Point2& bone, const Point2& apex, const ToothAxis& axis,
                             const std::optional<PixelSpacing>& spacing) {
  SiteMeasurement s;
  s.cej_point = cej;
  s.bone_point = bone;
  s.apex_point = apex;
  const double d1 = axis.along(bone) - axis.along(cej);
  const double d2 = axis.along(apex) - axis.along(cej);
  s.len1_px = std::max(0.0, d1);
  s.len2_px = std::max(0.0, d2);
  if (d2 < 0.0) {
    s.add_reason(reason::kCejApicalOfApex);
  } else if (d2 == 0.0) {
    s.add_reason(reason::kZeroRootLength);
  } else if (s.len1_px > s.len2_px) {
    s.add_reason(reason::kBoneBeyondApex);
  }
  if (spacing) {
    const Point2& d = axis.direction;
    s.len1_mm = px_vector_to_mm(d.x * s.len1_px, d.y * s.len1_px, *spacing);
    s.len2_mm = px_vector_to_mm(d.x * s.len2_px, d.y * s.len2_px, *spacing);
  } else {
    s.add_reason(reason::kNoSpacing);
  }
  const bool blocked = std::any_of(s.reasons.begin(), s.reasons.end(), is_blocking_reason);
  // Both lengths lie along the same direction, so the pixel ratio equals the mm ratio.
  if (!blocked) s.rbl_percent = 100.0 * s.len1_px / s.len2_px;
  return s;
}

std::optional<double> tooth_rbl_percent(std::span<const SiteMeasurement> sites) {
  std::optional<double> best;
  for (const auto& s : sites) {
    if (s.usable()) best = std::max(best.value_or(0.0), *s.rbl_percent);
  }
  return best;
}

SiteSide map_site_side(ImageSide side, const ToothNumber& tooth, Arch arch, Laterality laterality) {
  const SiteSide unmapped = side == ImageSide::Left ? SiteSide::LeftUnmapped : SiteSide::RightUnmapped;
  if (arch != Arch::Unknown && (arch == Arch::Maxilla) != tooth.is_upper()) return unmapped;
  // Anterior teeth legitimately appear on either lateral view.
  if (laterality != Laterality::Unknown && tooth.position() >= 4 &&
      (laterality == Laterality::Right) != tooth.is_patient_right()) {
    return unmapped;
  }
  // Labial view: the patient's right lies on image-left, so the midline of a right-side
  // tooth is towards image-right.
  const bool mesial_is_image_right = tooth.is_patient_right();
  const bool is_image_right = side == ImageSide::Right;
  return is_image_right == mesial_is_image_right ? SiteSide::Mesial : SiteSide::Distal;
}

std::vector<ToothAssessment> measure_image(const ImageRecord& record, const GeometryParams& params) {
  const int W = record.width(), H = record.height();
  const BinaryMask bone_curve = contour_mask(extract_contours(record.bone_mask), W, H);
  const BinaryMask bone_band = dilate_disc(bone_curve, params.band_px);
  const BinaryMask cej_band = dilate_disc(record.cej_mask, params.band_px);
  std::optional<BinaryMask> margin_band;
  if (record.crown_margin_mask) margin_band = dilate_disc(*record.crown_margin_mask, params.band_px);

  std::vector<ToothEntry> entries = record.tooth_table;
  std::sort(entries.begin(), entries.end(),
            [](const ToothEntry& a, const ToothEntry& b) { return a.number < b.number; });

  std::vector<ToothAssessment> teeth;
  std::vector<std::vector<Pixel>> candidates;  // per tooth, global coordinates
  for (const auto& entry : entries) {
    ToothAssessment t;
    t.tooth = entry.number;
    t.label = entry.label;
    t.image_id = record.image_id;
    for (ImageSide side : {ImageSide::Left, ImageSide::Right}) {
      SiteMeasurement s;
      s.image_side = side;
      s.side = map_site_side(side, entry.number, record.arch, record.laterality);
      t.sites.push_back(s);
    }
    auto fail_all = [&](const std::string& code) {
      for (auto& s : t.sites) s.add_reason(code);
    };
    candidates.emplace_back();

    const BinaryMask region = record.tooth_mask.region(entry.label);
    const std::vector<Pixel> pixels = foreground_pixels(region);
    if (pixels.size() < params.min_tooth_px) {
      fail_all(reason::kToothTooSmall);
      teeth.push_back(std::move(t));
      continue;
    }
    int bx0 = W, by0 = H, bx1 = -1, by1 = -1;
    for (const auto& p : pixels) {
      bx0 = std::min(bx0, p.x);
      by0 = std::min(by0, p.y);
      bx1 = std::max(bx1, p.x);
      by1 = std::max(by1, p.y);
    }
    const int margin = 2 * params.band_px + 2;
    Crop c;
    c.x0 = std::max(0, bx0 - margin);
    c.y0 = std::max(0, by0 - margin);
    c.w = std::min(W - 1, bx1 + margin) - c.x0 + 1;
    c.h = std::min(H - 1, by1 + margin) - c.y0 + 1;
    const Pixel origin{c.x0, c.y0};
    const BinaryMask region_c = crop_mask(region, c);
    const BinaryMask tooth_band = dilate_disc(boundary_pixels(region_c), params.band_px);
    const BinaryMask bone_cand = mask_and(crop_mask(bone_band, c), tooth_band);
    const BinaryMask cej_cand = mask_and(crop_mask(cej_band, c), tooth_band);

    std::vector<Point2> cej_points;
    for (const auto& p : foreground_pixels(cej_cand)) {
      const Pixel g{p.x + origin.x, p.y + origin.y};
      cej_points.push_back(pixel_center(g));
      candidates.back().push_back(g);
    }
    std::vector<Point2> bone_points;
    for (const auto& p : foreground_pixels(bone_cand)) {
      const Pixel g{p.x + origin.x, p.y + origin.y};
      bone_points.push_back(pixel_center(g));
      candidates.back().push_back(g);
    }

    if (cej_points.empty()) {
      fail_all(reason::kNoCej);
      teeth.push_back(std::move(t));
      continue;
    }
    const AxisOutcome ax = tooth_axis(pixels, cej_points, params, bone_points);
    if (!ax.axis) {
      fail_all(ax.reason);
      teeth.push_back(std::move(t));
      continue;
    }
    const ToothAxis& axis = *ax.axis;
    const SidePair cej = select_tiered(mask_and(crop_mask(record.cej_mask, c), tooth_band), cej_cand, origin, axis);
    const SidePair bone = select_tiered(mask_and(crop_mask(bone_curve, c), tooth_band), bone_cand, origin, axis);
    const std::optional<Apices> apices = apices_from(find_apex_pixels(region_c, origin, axis), W, H);

    for (auto& s : t.sites) {
      const bool left = s.image_side == ImageSide::Left;
      const auto& cp = left ? cej.left : cej.right;
      const auto& bp = left ? bone.left : bone.right;
      if (!cp || !bp || !apices) {
        s.cej_point = cp;
        s.bone_point = bp;
        if (!cp) s.add_reason(reason::kNoCej);
        if (!bp) s.add_reason(reason::kNoBoneIntersection);
        if (!apices) s.add_reason(reason::kZeroRootLength);
        continue;
      }
      const Point2 apex = left ? apices->left : apices->right;
      SiteMeasurement m = measure_site(*cp, *bp, apex, axis, record.spacing);
      m.image_side = s.image_side;
      m.side = s.side;
      if (left ? apices->left_fallback : apices->right_fallback) m.add_reason(reason::kSingleRootFallback);
      if (left ? apices->left_at_border : apices->right_at_border) m.add_reason(reason::kApexAtBorder);
      if (margin_band) {
        const Pixel q{static_cast<int>(std::floor(cp->x)), static_cast<int>(std::floor(cp->y))};
        if (margin_band->get(q.x, q.y)) m.add_reason(reason::kCejIsCrownMargin);
      }
      s = std::move(m);
    }
    teeth.push_back(std::move(t));
  }

  // A landmark within overlap_px of another tooth's candidate band may belong to the neighbour.
  for (std::size_t i = 0; i < teeth.size(); ++i) {
    for (auto& s : teeth[i].sites) {
      for (const auto& pt : {s.cej_point, s.bone_point}) {
        if (!pt || s.has_reason(reason::kNeighborOverlap)) continue;
        const int px = static_cast<int>(std::floor(pt->x)), py = static_cast<int>(std::floor(pt->y));
        for (std::size_t j = 0; j < teeth.size(); ++j) {
          if (j == i) continue;
          const bool near = std::any_of(candidates[j].begin(), candidates[j].end(), [&](const Pixel& q) {
            return std::abs(q.x - px) <= params.overlap_px && std::abs(q.y - py) <= params.overlap_px;
          });
          if (near) {
            s.add_reason(reason::kNeighborOverlap);
            break;
          }
        }
      }
    }
  }
  return teeth;
}

}  // namespace rbl
