#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rbl/casedx.hpp"
#include "rbl/domain.hpp"
#include "rbl/staging.hpp"

namespace rbl {

// Small deterministic generator: mt19937_64 with explicit conversions so draws do not
// depend on the standard library's distribution implementations.
class PhantomRng {
 public:
  explicit PhantomRng(std::uint64_t seed) : engine_(seed) {}
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  int integer(int lo, int hi);            // inclusive
  bool chance(double p) { return uniform() < p; }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// One synthetic tooth. Lengths are millimetres; positions are pixels.
// Local frame: u runs along the axis from the CEJ (u = 0) toward the apex, v across it,
// negative on the image-left side.
struct ToothSpec {
  ToothNumber tooth = ToothNumber::fdi(11);
  Point2 cej_center;              // axis point on the CEJ line
  double angle_deg = 0.0;         // tilt from vertical, (-45, 45)
  double crown_width_mm = 7.0;    // cervical width; the occlusal edge is 10% wider
  double crown_height_mm = 8.0;
  double root_length_mm = 14.0;
  int root_count = 1;
  double apex_offset_left_mm = 0.0;   // added to the root length on that side (two roots)
  double apex_offset_right_mm = 0.0;
  double drop_left = 0.0;         // bone crest depth as a fraction of the side's root length
  double drop_right = 0.0;
};

// Drop fraction placing the crest `cej_bone_mm` below the CEJ on a root of `root_mm`.
double drop_for_crest_mm(double cej_bone_mm, double root_mm);

struct PhantomImageSpec {
  std::string image_id = "phantom";
  int width = 0;
  int height = 0;
  PixelSpacing spacing = PixelSpacing::isotropic(0.07);
  Arch arch = Arch::Mandible;
  std::vector<ToothSpec> teeth;
  double jitter_px = 1.0;          // seeded sub-pixel shift of the whole layout
  bool allow_truncation = false;   // teeth may extend past the image edge
  StagingPolicy staging;
};

struct SiteTruth {
  ImageSide image_side = ImageSide::Left;
  SiteSide side = SiteSide::LeftUnmapped;
  Point2 cej, bone, apex;
  double len1_px = 0.0, len2_px = 0.0;
  double len1_mm = 0.0, len2_mm = 0.0;
  double rbl_percent = 0.0;
  RblStage stage = RblStage::NoBoneLoss;
};

struct ToothTruth {
  ToothNumber tooth = ToothNumber::fdi(11);
  int label = 0;
  std::string image_id;
  std::array<SiteTruth, 2> sites;  // image-left, image-right
  double rbl_percent = 0.0;
  RblStage stage = RblStage::NoBoneLoss;
  bool boundary_flag = false;
  double max_len1_mm = 0.0;
};

struct PhantomImage {
  ImageRecord record;
  std::vector<ToothTruth> truth;  // ordered by tooth number
};

// Rasterizes the specs and computes the analytic truth. Throws Error(Validation) when
// two teeth come within 2 px of each other, Error(Precondition) when a tooth leaves the
// image without allow_truncation or a tooth does not belong to the arch.
PhantomImage generate_image(const PhantomImageSpec& spec, std::uint64_t seed);

// Converts truth to assessments (for staging/casedx reuse).
ToothAssessment truth_as_assessment(const ToothTruth& t);

struct RandomPhantomOptions {
  int min_teeth = 1;
  int max_teeth = 3;
  double max_angle_deg = 30.0;
  double min_spacing_mm = 0.05;
  double max_spacing_mm = 0.08;
  bool anisotropic = true;
  double max_drop = 0.7;
};

// A random 1-3 tooth periapical image: mixed arches, tilted axes, one- and two-root teeth.
PhantomImage random_phantom(std::uint64_t seed, const RandomPhantomOptions& options = {});

// Lays teeth side by side, perpendicular to their mean axis, and sizes the image to fit.
// Fills cej_center, width and height.
void layout_teeth(PhantomImageSpec& spec, double gap_px = 12.0, double margin_px = 30.0);

// Flips `density` of the pixels of every mask independently and adds salt speckles of at
// most 4 px. Ground truth is unaffected. density in [0, 0.05].
ImageRecord degrade(const ImageRecord& record, double density, std::uint64_t seed);

// ---- full-mouth cases --------------------------------------------------------

struct CaseOptions {
  int images_per_arch = 0;          // 0: chosen from the tooth count (12-20 images in total)
  bool shuffle_images = false;
  std::optional<NumberingSystem> numbering;  // random when unset
  DiagnosisPolicy diagnosis;
  StagingPolicy staging;
};

struct PhantomCase {
  std::string case_id;
  std::optional<int> patient_age;
  std::vector<PhantomImage> images;
  std::vector<ToothTruth> merged;    // governing truth per tooth
  CaseDiagnosis expected;
  DiagnosisPolicy diagnosis;
};

// stage_mix: proportions of {no loss, I, II, III}, summing to 1. Throws Error(Validation)
// for malformed mixes and for mixes with exactly one affected tooth.
PhantomCase generate_case(const std::string& case_id, int n_teeth, const std::array<double, 4>& stage_mix,
                          std::optional<int> age, std::uint64_t seed, const CaseOptions& options = {});

// Writes manifest.json, truth.json and images/*.png in the ingest format.
void write_phantom_case(const PhantomCase& c, const std::filesystem::path& dir);

// Expected diagnosis recomputed from merged truth.
CaseDiagnosis diagnose_truth(const std::vector<ToothTruth>& merged, std::optional<int> age,
                             const DiagnosisPolicy& policy);

}  // namespace rbl
