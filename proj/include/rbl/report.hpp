#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rbl/casedx.hpp"
#include "rbl/phantom.hpp"
#include "rbl/pipeline.hpp"

namespace rbl {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "rbl-report/1";
inline constexpr const char* kTruthSchema = "rbl-phantom-truth/1";

// Reports carry doubles rounded to 1e-6 so re-runs print identical text.
double round6(double v);

Json spacing_to_json(const std::optional<PixelSpacing>& spacing);
Json site_to_json(const SiteMeasurement& site);
Json tooth_to_json(const ToothAssessment& tooth);
Json truth_tooth_to_json(const ToothTruth& tooth);
Json diagnosis_to_json(const CaseDiagnosis& d);
Json diagnosis_policy_to_json(const DiagnosisPolicy& p);
Json config_to_json(const AnalysisConfig& config);
// Ground-truth document written next to a phantom case.
Json phantom_truth_json(const PhantomCase& c);

// Overrides config fields from a policy document shaped like config_to_json's output.
// Unknown keys raise Error(Schema) naming the field.
void apply_policy_json(const Json& doc, AnalysisConfig& config);

// `merged` and `diagnosis` are present for diagnose runs.
Json analysis_report(const CaseAnalysis& analysis, const AnalysisConfig& config, const std::string& command,
                     const CaseAssessment* merged = nullptr, const CaseDiagnosis* diagnosis = nullptr);

std::string dump_json(const Json& doc);  // 2-space indent, trailing newline
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);
Json read_json_file(const std::filesystem::path& path);

// ---- reading reports and truth files back (evaluation) ------------------------

struct ToothStageRecord {
  std::string image_id;
  int fdi = 0;
  std::optional<RblStage> stage;
  std::optional<double> rbl_percent;
  std::optional<double> max_len1_mm;
  bool boundary_flag = false;
};

// Per-image tooth rows of a report or a truth file.
std::vector<ToothStageRecord> read_tooth_stages(const Json& doc, const std::string& source);

struct DiagnosisRecord {
  bool is_periodontitis = false;
  std::optional<Extent> extent;
  std::optional<RblStage> stage;
  std::optional<Grade> grade;

  friend bool operator==(const DiagnosisRecord&, const DiagnosisRecord&) = default;
};

// From "diagnosis" (reports) or "expected_diagnosis" (truth files).
DiagnosisRecord read_diagnosis(const Json& doc, const std::string& source);
DiagnosisRecord to_record(const CaseDiagnosis& d);

}  // namespace rbl
