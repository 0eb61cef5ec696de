#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rbl/domain.hpp"

namespace rbl {

// ---- rasterization ---------------------------------------------------------

// Pixel (i, j) is set iff its centre (i+0.5, j+0.5) lies inside the polygon under the
// even-odd rule; centres exactly on an edge count as inside. Zero-area polygons yield an
// empty mask.
BinaryMask rasterize_polygon(std::span<const Point2> polygon, int width, int height);

// Supercover rasterization: every pixel whose half-open box [i, i+1) x [j, j+1) contains a
// point of some segment. Throws Error(Precondition) for fewer than two vertices.
BinaryMask rasterize_polyline(std::span<const Point2> polyline, int width, int height);

// Signed shoelace area (positive for counter-clockwise in a y-up frame).
double polygon_area(std::span<const Point2> polygon);

// ---- annotations -----------------------------------------------------------

struct AnnotatedPolyline {
  RoiKind kind = RoiKind::Cej;
  bool crown_margin = false;
  std::vector<Point2> points;
};

struct AnnotationSet {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<RoiPolygon> polygons;
  std::vector<AnnotatedPolyline> polylines;
};

struct RasterizedAnnotations {
  BinaryMask bone_mask;
  ToothLabelMask tooth_mask;
  BinaryMask cej_mask;
  std::optional<BinaryMask> crown_margin_mask;
  std::vector<RoiPolygon> other_rois;
  std::vector<std::string> warnings;
};

// Parses the project annotation schema (JSON). Vertices outside the image are clamped and
// reported in `warnings`.
AnnotationSet parse_annotation_set(const std::string& json_text, const std::string& source,
                                   std::vector<std::string>* warnings = nullptr);
AnnotationSet load_annotation_set(const std::filesystem::path& path,
                                  std::vector<std::string>* warnings = nullptr);
RasterizedAnnotations rasterize_annotations(const AnnotationSet& set);

// ---- cases -----------------------------------------------------------------

struct CaseRecord {
  std::string case_id;
  std::optional<int> patient_age;
  std::vector<ValidatedImageRecord> images;  // sorted by image_id
  std::vector<std::string> warnings;
};

struct LoadOptions {
  int jobs = 1;
};

// Reads a case manifest, loads or rasterizes every image, validates the records and sorts
// them by image_id. Relative paths resolve against the manifest directory.
CaseRecord load_case(const std::filesystem::path& manifest_path, const LoadOptions& options = {});

}  // namespace rbl
