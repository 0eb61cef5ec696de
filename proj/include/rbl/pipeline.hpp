#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rbl/casedx.hpp"
#include "rbl/geometry.hpp"
#include "rbl/ingest.hpp"
#include "rbl/maskproc.hpp"
#include "rbl/staging.hpp"

namespace rbl {

// Effective configuration of a run. Everything here is echoed into reports.
struct AnalysisConfig {
  MaskProcParams maskproc;
  GeometryParams geometry;
  StagingPolicy staging;
  DiagnosisPolicy diagnosis;

  void validate() const;
};

struct ImageAnalysis {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::optional<PixelSpacing> spacing;
  Arch arch = Arch::Unknown;
  Laterality laterality = Laterality::Unknown;
  std::vector<ToothAssessment> teeth;  // staged, ordered by tooth number
  std::vector<std::string> warnings;
  std::optional<ImageRecord> processed;  // cleaned masks, kept on request (overlays)
};

struct CaseAnalysis {
  std::string case_id;
  std::optional<int> patient_age;
  std::vector<ImageAnalysis> images;  // ordered by image_id
  std::vector<std::string> warnings;

  bool any_unmeasurable() const;
  std::vector<ToothAssessment> all_teeth() const;
};

// maskproc -> geometry -> staging for one image.
ImageAnalysis analyze_image(const ValidatedImageRecord& image, const AnalysisConfig& config,
                            bool keep_processed = false);

// Images are processed by up to `jobs` workers; the result does not depend on `jobs`.
CaseAnalysis analyze_case(const CaseRecord& c, const AnalysisConfig& config, int jobs = 1,
                          bool keep_processed = false);

}  // namespace rbl
