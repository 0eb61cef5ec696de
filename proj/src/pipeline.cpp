#include "rbl/pipeline.hpp"

#include <algorithm>
#include <future>

namespace rbl {

void AnalysisConfig::validate() const {
  check_params(maskproc);
  staging.validate();
  diagnosis.validate();
  if (geometry.band_px < 0 || geometry.overlap_px < 0 || !(geometry.min_eigen_ratio >= 1.0)) {
    throw Error(ErrorKind::Validation, "geometry parameters out of range");
  }
}

bool CaseAnalysis::any_unmeasurable() const {
  for (const auto& img : images) {
    for (const auto& t : img.teeth) {
      if (!t.measurable()) return true;
    }
  }
  return false;
}

std::vector<ToothAssessment> CaseAnalysis::all_teeth() const {
  std::vector<ToothAssessment> out;
  for (const auto& img : images) out.insert(out.end(), img.teeth.begin(), img.teeth.end());
  return out;
}

ImageAnalysis analyze_image(const ValidatedImageRecord& image, const AnalysisConfig& config, bool keep_processed) {
  const ImageRecord& rec = image.record();
  ImageAnalysis out;
  out.image_id = rec.image_id;
  out.width = rec.width();
  out.height = rec.height();
  out.spacing = rec.spacing;
  out.arch = rec.arch;
  out.laterality = rec.laterality;
  out.warnings = image.warnings();

  ImageRecord processed = postprocess_record(rec, config.maskproc);
  out.teeth = measure_image(processed, config.geometry);
  for (auto& t : out.teeth) {
    stage_assessment(t, config.staging);
    if (!t.measurable()) t.flags.push_back("unmeasurable");
  }
  if (keep_processed) out.processed = std::move(processed);
  return out;
}

CaseAnalysis analyze_case(const CaseRecord& c, const AnalysisConfig& config, int jobs, bool keep_processed) {
  config.validate();
  CaseAnalysis out;
  out.case_id = c.case_id;
  out.patient_age = c.patient_age;
  out.warnings = c.warnings;
  out.images.resize(c.images.size());
  const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1) {
    for (std::size_t i = 0; i < c.images.size(); ++i) out.images[i] = analyze_image(c.images[i], config, keep_processed);
  } else {
    for (std::size_t start = 0; start < c.images.size(); start += workers) {
      const std::size_t end = std::min(c.images.size(), start + workers);
      std::vector<std::future<ImageAnalysis>> batch;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(std::async(std::launch::async, [&, i] { return analyze_image(c.images[i], config, keep_processed); }));
      }
      for (std::size_t i = start; i < end; ++i) out.images[i] = batch[i - start].get();
    }
  }
  std::stable_sort(out.images.begin(), out.images.end(),
                   [](const ImageAnalysis& a, const ImageAnalysis& b) { return a.image_id < b.image_id; });
  return out;
}

}  // namespace rbl
