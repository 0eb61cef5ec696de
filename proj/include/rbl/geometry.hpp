#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rbl/domain.hpp"

namespace rbl {

struct GeometryParams {
  std::size_t min_tooth_px = 50;
  double min_eigen_ratio = 1.05;  // below this the covariance is treated as isotropic
  int band_px = 1;                // dilation bridging raster curves and tooth contours
  int overlap_px = 2;             // landmark this close to another tooth's candidates
};

// Principal axis of a tooth region. `along` grows from crown toward apex; `across` is
// negative on the image-left side of the axis.
struct ToothAxis {
  Point2 centroid;
  Point2 direction;  // unit, crown -> apex
  Point2 normal;     // unit, perpendicular, normal.x > 0
  double coronal_end = 0.0;
  double apical_end = 0.0;
  double eigen_ratio = 0.0;

  double along(const Point2& p) const { return (p - centroid).dot(direction); }
  double across(const Point2& p) const { return (p - centroid).dot(normal); }
};

struct AxisOutcome {
  std::optional<ToothAxis> axis;
  std::string reason;  // set when axis is empty
};

// PCA over pixel centres. Oriented so the bone contact points lie apical of the CEJ
// points on average; without bone contact, so the mean CEJ projection is coronal of
// the centroid.
AxisOutcome tooth_axis(std::span<const Pixel> tooth_pixels, std::span<const Point2> cej_points,
                       const GeometryParams& params = {}, std::span<const Point2> bone_points = {});

struct SidePair {
  std::optional<Point2> left;
  std::optional<Point2> right;
};

// Most coronal pixel per side of mask_and(dilate(curve), dilate(boundary(tooth))).
// `bone_intersections` uses the bone-area contour as the curve.
SidePair curve_intersections(const BinaryMask& curve, const BinaryMask& tooth_region, const ToothAxis& axis,
                             int band_px = 1);
SidePair bone_intersections(const BinaryMask& bone_mask, const BinaryMask& tooth_region, const ToothAxis& axis,
                            int band_px = 1);
SidePair cej_intersections(const BinaryMask& cej_mask, const BinaryMask& tooth_region, const ToothAxis& axis,
                           int band_px = 1);

struct Apices {
  Point2 left;
  Point2 right;
  bool left_fallback = false;
  bool right_fallback = false;
  bool left_at_border = false;
  bool right_at_border = false;
};

// Per side, the tooth pixel with the largest along-axis coordinate beyond the centroid.
// Returns nullopt only when no pixel lies beyond the centroid on either side.
std::optional<Apices> locate_root_apices(const BinaryMask& tooth_region, const ToothAxis& axis);

// Along-axis components of bone - cej and apex - cej, clamped at 0. Blocking reasons are
// attached for inverted configurations; rbl_percent is set only for unblocked sites.
SiteMeasurement measure_site(const Point2& cej, const Point2& bone, const Point2& apex, const ToothAxis& axis,
                             const std::optional<PixelSpacing>& spacing);

// Max of 100 len1/len2 over usable sites.
std::optional<double> tooth_rbl_percent(std::span<const SiteMeasurement> sites);

// Mesial/distal for an image side, or the unmapped side when the record contradicts the tooth.
SiteSide map_site_side(ImageSide side, const ToothNumber& tooth, Arch arch, Laterality laterality);

// Measures every tooth in the table (ordered by tooth number). Sites are unstaged.
std::vector<ToothAssessment> measure_image(const ImageRecord& record, const GeometryParams& params = {});

}  // namespace rbl
