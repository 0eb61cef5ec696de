#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "rbl/error.hpp"
#include "rbl/mask.hpp"

namespace rbl {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Point2& o) const { return x * o.x + y * o.y; }
  double norm() const;
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 pixel_center(const Pixel& p) { return {p.x + 0.5, p.y + 0.5}; }

// Millimetres per pixel along each image axis. Both values are positive and finite.
class PixelSpacing {
 public:
  static PixelSpacing create(double row_mm_per_px, double col_mm_per_px);
  static PixelSpacing isotropic(double mm_per_px) { return create(mm_per_px, mm_per_px); }

  double row_mm_per_px() const { return row_; }
  double col_mm_per_px() const { return col_; }
  bool is_isotropic() const { return row_ == col_; }

  friend bool operator==(const PixelSpacing&, const PixelSpacing&) = default;

 private:
  PixelSpacing(double row, double col) : row_(row), col_(col) {}
  double row_;
  double col_;
};

// Physical length of a pixel displacement: sqrt((dx*col)^2 + (dy*row)^2).
double px_vector_to_mm(double dx, double dy, const PixelSpacing& spacing);

enum class NumberingSystem { FDI, Universal };
const char* to_string(NumberingSystem s);
NumberingSystem parse_numbering_system(const std::string& text);

// A permanent tooth, stored as entered and normalised to FDI two-digit notation.
class ToothNumber {
 public:
  static ToothNumber from(NumberingSystem system, int entered);
  static ToothNumber fdi(int code) { return from(NumberingSystem::FDI, code); }
  static ToothNumber universal(int code) { return from(NumberingSystem::Universal, code); }

  int fdi_code() const { return fdi_; }
  int entered() const { return entered_; }
  NumberingSystem system() const { return system_; }
  int quadrant() const { return fdi_ / 10; }
  int position() const { return fdi_ % 10; }  // 1 = central incisor .. 8 = third molar
  bool is_upper() const { return quadrant() == 1 || quadrant() == 2; }
  // Quadrants 1 and 4 are on the patient's right.
  bool is_patient_right() const { return quadrant() == 1 || quadrant() == 4; }

  // Index 0..15 along the arch from the patient's right third molar to the left one.
  int arch_index() const;

  friend bool operator==(const ToothNumber& a, const ToothNumber& b) { return a.fdi_ == b.fdi_; }
  friend auto operator<=>(const ToothNumber& a, const ToothNumber& b) { return a.fdi_ <=> b.fdi_; }

 private:
  ToothNumber(int fdi, int entered, NumberingSystem system)
      : fdi_(fdi), entered_(entered), system_(system) {}
  int fdi_;
  int entered_;
  NumberingSystem system_;
};

int universal_to_fdi(int universal);
int fdi_to_universal(int fdi);
bool is_valid_fdi(int fdi);

// Consecutive positions in the same arch, the midline counting as consecutive.
bool teeth_adjacent(const ToothNumber& a, const ToothNumber& b);

enum class Laterality { Left, Right, Unknown };
enum class Arch { Maxilla, Mandible, Unknown };
const char* to_string(Laterality v);
const char* to_string(Arch v);
Laterality parse_laterality(const std::string& text);
Arch parse_arch(const std::string& text);

struct ToothEntry {
  int label = 0;  // value in the tooth label mask, 1..254
  ToothNumber number = ToothNumber::fdi(11);
  bool allow_disconnected = false;
};

enum class RoiKind { BoneArea, Tooth, Other, Cej };
const char* to_string(RoiKind k);

// An annotated region kept as drawn. "other" ROIs (restorations, defects) are carried
// through ingest unchanged and not used by measurement.
struct RoiPolygon {
  RoiKind kind = RoiKind::Other;
  std::optional<int> label;
  std::string name;
  std::vector<Point2> points;
};

struct ImageRecord {
  std::string image_id;
  std::vector<ToothEntry> tooth_table;
  BinaryMask bone_mask;
  ToothLabelMask tooth_mask;
  BinaryMask cej_mask;
  // Subset of cej_mask drawn along a crown margin because the CEJ was hidden.
  std::optional<BinaryMask> crown_margin_mask;
  std::optional<PixelSpacing> spacing;
  Laterality laterality = Laterality::Unknown;
  Arch arch = Arch::Unknown;
  std::vector<RoiPolygon> other_rois;

  int width() const { return bone_mask.width(); }
  int height() const { return bone_mask.height(); }
  const ToothEntry* find_label(int label) const;
};

// An ImageRecord that passed validate_image_record. Only constructible through it.
class ValidatedImageRecord {
 public:
  const ImageRecord& record() const { return record_; }
  const std::vector<std::string>& limitations() const { return limitations_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  friend ValidatedImageRecord validate_image_record(ImageRecord record);
  ValidatedImageRecord(ImageRecord r) : record_(std::move(r)) {}
  ImageRecord record_;
  std::vector<std::string> limitations_;
  std::vector<std::string> warnings_;
};

// Throws Error(Structural) on dimension mismatch or a mask label missing from the table.
ValidatedImageRecord validate_image_record(ImageRecord record);

enum class RblStage { NoBoneLoss = 0, StageI = 1, StageII = 2, StageIII = 3 };
const char* to_string(RblStage s);
RblStage parse_stage(const std::string& text);
inline bool operator<(RblStage a, RblStage b) { return static_cast<int>(a) < static_cast<int>(b); }
inline bool operator>(RblStage a, RblStage b) { return b < a; }
inline bool operator<=(RblStage a, RblStage b) { return !(b < a); }
inline bool operator>=(RblStage a, RblStage b) { return !(a < b); }

// Image-relative side of the tooth axis, and its anatomical mapping when known.
enum class ImageSide { Left, Right };
enum class SiteSide { Mesial, Distal, LeftUnmapped, RightUnmapped };
const char* to_string(ImageSide s);
const char* to_string(SiteSide s);

// Reasons attached to a site. Blocking reasons exclude the site from RBL%; the others
// are limitations that only clear the `reliable` bit.
namespace reason {
inline constexpr const char* kNoCej = "no-cej";
inline constexpr const char* kNoBoneIntersection = "no-bone-intersection";
inline constexpr const char* kAxisUndefined = "axis-undefined";
inline constexpr const char* kToothTooSmall = "tooth-too-small";
inline constexpr const char* kBoneBeyondApex = "bone-beyond-apex";
inline constexpr const char* kZeroRootLength = "zero-root-length";
inline constexpr const char* kCejApicalOfApex = "cej-apical-of-apex";
inline constexpr const char* kNoSpacing = "no-spacing";
inline constexpr const char* kApexAtBorder = "apex-at-border";
inline constexpr const char* kSingleRootFallback = "single-root-fallback";
inline constexpr const char* kCejIsCrownMargin = "cej-is-crown-margin";
inline constexpr const char* kNeighborOverlap = "neighbor-overlap";
inline constexpr const char* kMmRuleSkipped = "mm-rule-skipped";
}  // namespace reason

bool is_blocking_reason(const std::string& code);

struct SiteMeasurement {
  ImageSide image_side = ImageSide::Left;
  SiteSide side = SiteSide::LeftUnmapped;
  std::optional<Point2> cej_point;
  std::optional<Point2> bone_point;
  std::optional<Point2> apex_point;
  double len1_px = 0.0;
  double len2_px = 0.0;
  std::optional<double> len1_mm;
  std::optional<double> len2_mm;
  std::optional<double> rbl_percent;
  std::optional<RblStage> stage;
  std::vector<std::string> reasons;

  bool usable() const;    // no blocking reason and rbl_percent defined
  bool reliable() const;  // usable and no reason at all
  void add_reason(const std::string& code);
  bool has_reason(const std::string& code) const;
};

struct ToothAssessment {
  ToothNumber tooth = ToothNumber::fdi(11);
  int label = 0;
  std::string image_id;
  // Image-left site first, then image-right.
  std::vector<SiteMeasurement> sites;
  std::optional<double> rbl_percent;
  std::optional<RblStage> stage;
  bool boundary_flag = false;
  // Largest CEJ-to-bone distance over usable sites, when spacing is known.
  std::optional<double> max_len1_mm;
  std::vector<std::string> flags;

  bool measurable() const { return rbl_percent.has_value() && stage.has_value(); }
  const SiteMeasurement* site(SiteSide side) const;
};

}  // namespace rbl
