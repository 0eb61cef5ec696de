#include "rbl/casedx.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace rbl {

const char* to_string(Extent e) { return e == Extent::Localized ? "localized" : "generalized"; }

const char* to_string(Grade g) {
  switch (g) {
    case Grade::A: return "A";
    case Grade::B: return "B";
    case Grade::C: return "C";
  }
  return "?";
}

Extent parse_extent(const std::string& text) {
  if (text == "localized") return Extent::Localized;
  if (text == "generalized") return Extent::Generalized;
  throw Error(ErrorKind::Schema, "unknown extent '" + text + "'");
}

Grade parse_grade(const std::string& text) {
  if (text == "A") return Grade::A;
  if (text == "B") return Grade::B;
  if (text == "C") return Grade::C;
  throw Error(ErrorKind::Schema, "unknown grade '" + text + "'");
}

void DiagnosisPolicy::validate() const {
  if (!(generalized_min_fraction > 0.0 && generalized_min_fraction <= 1.0)) {
    throw Error(ErrorKind::Validation, "generalized fraction must lie in (0, 1]");
  }
  if (min_teeth_at_stage < 1) throw Error(ErrorKind::Validation, "min_teeth_at_stage must be >= 1");
  if (!(grade_a_below > 0.0 && grade_a_below <= grade_c_above) || !std::isfinite(grade_c_above)) {
    throw Error(ErrorKind::Validation, "grade cutoffs must satisfy 0 < A cutoff <= C cutoff");
  }
}

std::vector<const ToothAssessment*> CaseAssessment::assessed() const {
  std::vector<const ToothAssessment*> out;
  for (const auto& t : teeth) {
    if (t.assessment.measurable()) out.push_back(&t.assessment);
  }
  return out;
}

namespace {

// True when `a` should govern over `b`.
bool governs(const ToothAssessment& a, const ToothAssessment& b) {
  if (a.measurable() != b.measurable()) return a.measurable();
  if (a.measurable()) {
    if (*a.rbl_percent != *b.rbl_percent) return *a.rbl_percent > *b.rbl_percent;
    if (*a.stage != *b.stage) return *a.stage > *b.stage;
  }
  return a.image_id < b.image_id;
}

}  // namespace

CaseAssessment merge_across_images(std::span<const ToothAssessment> per_image, std::string case_id,
                                   std::optional<int> patient_age) {
  std::map<std::pair<std::string, int>, int> label_numbers;
  for (const auto& t : per_image) {
    auto [it, inserted] = label_numbers.emplace(std::make_pair(t.image_id, t.label), t.tooth.fdi_code());
    if (!inserted && it->second != t.tooth.fdi_code()) {
      throw Error(ErrorKind::Structural, "image " + t.image_id + " maps label " + std::to_string(t.label) +
                                             " to teeth " + std::to_string(it->second) + " and " +
                                             std::to_string(t.tooth.fdi_code()));
    }
  }

  std::map<int, MergedTooth> merged;
  for (const auto& t : per_image) {
    auto it = merged.find(t.tooth.fdi_code());
    if (it == merged.end()) {
      merged.emplace(t.tooth.fdi_code(), MergedTooth{t, {t.image_id}});
      continue;
    }
    it->second.images.push_back(t.image_id);
    if (governs(t, it->second.assessment)) it->second.assessment = t;
  }
  CaseAssessment out;
  out.case_id = std::move(case_id);
  out.patient_age = patient_age;
  for (auto& [code, m] : merged) {
    std::sort(m.images.begin(), m.images.end());
    m.images.erase(std::unique(m.images.begin(), m.images.end()), m.images.end());
    out.teeth.push_back(std::move(m));
  }
  return out;
}

bool is_periodontitis_case(const CaseAssessment& c) {
  std::vector<const ToothAssessment*> affected;
  for (const auto* t : c.assessed()) {
    if (*t->stage >= RblStage::StageI) affected.push_back(t);
  }
  for (std::size_t i = 0; i < affected.size(); ++i) {
    for (std::size_t j = i + 1; j < affected.size(); ++j) {
      if (!teeth_adjacent(affected[i]->tooth, affected[j]->tooth)) return true;
    }
  }
  return false;
}

RblStage case_stage(const CaseAssessment& c, const DiagnosisPolicy& policy) {
  const auto assessed = c.assessed();
  for (RblStage s : {RblStage::StageIII, RblStage::StageII, RblStage::StageI}) {
    const auto n = std::count_if(assessed.begin(), assessed.end(), [&](const ToothAssessment* t) { return *t->stage >= s; });
    if (n >= policy.min_teeth_at_stage) return s;
  }
  return RblStage::StageI;
}

ExtentResult case_extent(const CaseAssessment& c, RblStage stage, const DiagnosisPolicy& policy) {
  const auto assessed = c.assessed();
  if (assessed.empty()) throw Error(ErrorKind::Precondition, "extent needs at least one assessed tooth");
  ExtentResult r;
  r.assessed = static_cast<int>(assessed.size());
  for (const auto* t : assessed) {
    const bool counts = policy.extent_counts_any_stage ? *t->stage >= RblStage::StageI : *t->stage == stage;
    if (counts) ++r.affected;
  }
  r.fraction = static_cast<double>(r.affected) / r.assessed;
  r.extent = r.fraction >= policy.generalized_min_fraction ? Extent::Generalized : Extent::Localized;
  return r;
}

GradeResult grade_from_ratio(double ratio, const DiagnosisPolicy& policy) {
  GradeResult g;
  g.ratio = ratio;
  if (ratio < policy.grade_a_below) {
    g.grade = Grade::A;
  } else if (ratio <= policy.grade_c_above) {
    g.grade = Grade::B;
  } else {
    g.grade = Grade::C;
  }
  return g;
}

std::optional<GradeResult> case_grade(const CaseAssessment& c, const DiagnosisPolicy& policy) {
  if (!c.patient_age || *c.patient_age <= 0) return std::nullopt;
  double worst = 0.0;
  for (const auto* t : c.assessed()) worst = std::max(worst, *t->rbl_percent);
  return grade_from_ratio(worst / *c.patient_age, policy);
}

CaseDiagnosis diagnose(const CaseAssessment& c, const DiagnosisPolicy& policy) {
  policy.validate();
  CaseDiagnosis d;
  const auto assessed = c.assessed();
  d.assessed_teeth = static_cast<int>(assessed.size());
  for (const auto* t : assessed) {
    if (!d.worst_rbl_percent || *t->rbl_percent > *d.worst_rbl_percent) d.worst_rbl_percent = *t->rbl_percent;
  }
  for (const auto* t : assessed) {
    if (*t->rbl_percent == *d.worst_rbl_percent) d.worst_teeth.push_back(t->tooth.fdi_code());
  }
  if (assessed.empty()) d.flags.push_back("no-assessed-teeth");

  d.is_periodontitis = is_periodontitis_case(c);
  if (!d.is_periodontitis) return d;

  d.stage = case_stage(c, policy);
  const ExtentResult e = case_extent(c, *d.stage, policy);
  d.extent = e.extent;
  d.affected_teeth = e.affected;
  d.affected_fraction = e.fraction;
  if (const auto g = case_grade(c, policy)) {
    d.grade = g->grade;
    d.grade_ratio = g->ratio;
  } else {
    d.flags.push_back("age-missing");
  }
  return d;
}

}  // namespace rbl
