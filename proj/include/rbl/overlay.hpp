#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rbl/domain.hpp"
#include "rbl/png_io.hpp"

namespace rbl {

using Rgb = std::array<std::uint8_t, 3>;

// Fixed palette. Marker colours are used by nothing else in the picture, so markers can
// be recovered from the PNG by exact colour match.
namespace palette {
inline constexpr Rgb kBonePoint{255, 255, 0};   // yellow
inline constexpr Rgb kCejPoint{0, 255, 0};      // green
inline constexpr Rgb kApexPoint{255, 0, 0};     // red
inline constexpr Rgb kLine1{0, 255, 255};       // CEJ -> bone crest
inline constexpr Rgb kLine2{255, 140, 0};       // CEJ -> apex
inline constexpr Rgb kBoneOutline{70, 110, 255};
inline constexpr Rgb kToothOutline{235, 235, 235};
inline constexpr Rgb kCejOutline{200, 0, 200};
inline constexpr Rgb kBoneFill{45, 45, 45};
inline constexpr Rgb kToothFill{110, 110, 110};
}  // namespace palette

inline constexpr int kOverlayScale = 4;

struct OverlayMarker {
  int tooth = 0;  // FDI
  ImageSide image_side = ImageSide::Left;
  std::string kind;  // "bone" | "cej" | "apex"
  int x = 0;         // marker centre in overlay pixels
  int y = 0;
};

struct Overlay {
  png::Rgb8 image;
  std::vector<OverlayMarker> markers;
  std::vector<std::string> warnings;
};

// `record` should hold the cleaned masks the teeth were measured on. Markers and lines
// are drawn for usable sites only; other sites produce a warning.
Overlay render_overlay(const ImageRecord& record, const std::vector<ToothAssessment>& teeth);

// Centre of the overlay block holding the source pixel that contains `p`.
Pixel overlay_anchor(const Point2& p);

}  // namespace rbl
