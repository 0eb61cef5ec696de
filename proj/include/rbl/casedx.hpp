#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rbl/domain.hpp"

namespace rbl {

enum class Extent { Localized, Generalized };
enum class Grade { A, B, C };
const char* to_string(Extent e);
const char* to_string(Grade g);
Extent parse_extent(const std::string& text);
Grade parse_grade(const std::string& text);

struct DiagnosisPolicy {
  double generalized_min_fraction = 0.30;  // inclusive
  int min_teeth_at_stage = 1;
  bool extent_counts_any_stage = false;    // count every affected tooth, not just case-stage ones
  double grade_a_below = 0.25;             // worst RBL% / age
  double grade_c_above = 1.0;

  void validate() const;
};

struct MergedTooth {
  ToothAssessment assessment;            // the governing measurement
  std::vector<std::string> images;       // every image showing the tooth, sorted
};

struct CaseAssessment {
  std::string case_id;
  std::optional<int> patient_age;
  std::vector<MergedTooth> teeth;  // one per tooth number, ascending FDI

  // Teeth with a stage, i.e. measurable in at least one image.
  std::vector<const ToothAssessment*> assessed() const;
};

// Keeps, per tooth, the measurable assessment with the largest RBL%; ties go to the higher
// stage, then the lexicographically smaller image_id. Teeth never measurable are kept
// with their first (by image_id) assessment. Throws Error(Structural) when one image
// labels the same tooth-table label with two different tooth numbers.
CaseAssessment merge_across_images(std::span<const ToothAssessment> per_image, std::string case_id = {},
                                   std::optional<int> patient_age = std::nullopt);

// At least two teeth at stage >= I that are not adjacent in the arch sequence.
bool is_periodontitis_case(const CaseAssessment& c);

// Highest stage S such that at least min_teeth_at_stage teeth are at S or worse.
RblStage case_stage(const CaseAssessment& c, const DiagnosisPolicy& policy = {});

struct ExtentResult {
  Extent extent = Extent::Localized;
  int affected = 0;
  int assessed = 0;
  double fraction = 0.0;
};
// Throws Error(Precondition) when no tooth is assessed.
ExtentResult case_extent(const CaseAssessment& c, RblStage stage, const DiagnosisPolicy& policy = {});

struct GradeResult {
  Grade grade = Grade::A;
  double ratio = 0.0;
};
GradeResult grade_from_ratio(double ratio, const DiagnosisPolicy& policy = {});
// nullopt when the age is unknown.
std::optional<GradeResult> case_grade(const CaseAssessment& c, const DiagnosisPolicy& policy = {});

struct CaseDiagnosis {
  bool is_periodontitis = false;
  std::optional<Extent> extent;
  std::optional<RblStage> stage;
  std::optional<Grade> grade;
  // rationale
  std::vector<int> worst_teeth;  // FDI codes holding the worst RBL%
  std::optional<double> worst_rbl_percent;
  int affected_teeth = 0;        // numerator of the extent fraction
  int assessed_teeth = 0;
  std::optional<double> affected_fraction;
  std::optional<double> grade_ratio;
  std::vector<std::string> flags;
};

CaseDiagnosis diagnose(const CaseAssessment& c, const DiagnosisPolicy& policy = {});

}  // namespace rbl
