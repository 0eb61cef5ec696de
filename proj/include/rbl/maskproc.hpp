#pragma once

#include <string>
#include <vector>

#include "rbl/domain.hpp"

namespace rbl {

enum class ContourKind { Outer, Hole };

// Closed chain of boundary pixels (first == last), consecutive points 8-adjacent.
// Outer contours run counter-clockwise as displayed (y down), holes clockwise.
struct Contour {
  ContourKind kind = ContourKind::Outer;
  std::vector<Pixel> points;
};

// Truncated Gaussian (radius ceil(3 sigma), normalised) with edge replication, then
// `value >= threshold`. sigma == 0 returns the input unchanged.
BinaryMask smooth_binarize(const BinaryMask& mask, double sigma, double threshold);

// Deletes every component with fewer than `min_area_px` pixels.
BinaryMask remove_small_components(const BinaryMask& mask, std::size_t min_area_px,
                                   Connectivity connectivity = Connectivity::Eight);

// Border following (8-connected foreground, 4-connected background). One outer contour per
// component plus one per hole, in raster order of their starting pixels.
std::vector<Contour> extract_contours(const BinaryMask& mask);

// Pixels visited by any contour.
BinaryMask contour_mask(const std::vector<Contour>& contours, int width, int height);

// Throws Error(Structural) when the shapes differ.
BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_not(const BinaryMask& a);

struct MaskProcParams {
  double sigma = 1.5;
  double threshold = 0.5;
  std::size_t min_area_bone = 64;
  std::size_t min_area_tooth = 64;
  std::size_t min_area_cej = 8;
};

// Validates parameter ranges; throws Error(Validation).
void check_params(const MaskProcParams& params);

// Bone and each tooth label are smoothed then cleaned of small components. The thin CEJ
// curve is only cleaned of small components; smoothing at this sigma would erase it.
ImageRecord postprocess_record(const ImageRecord& record, const MaskProcParams& params);

}  // namespace rbl
