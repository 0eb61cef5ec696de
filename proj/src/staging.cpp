#include "rbl/staging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace rbl {

void StagingPolicy::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(stage1_max_percent) || !finite(stage2_max_percent) || !(stage1_max_percent > 0.0) ||
      !(stage1_max_percent < stage2_max_percent) || !(stage2_max_percent < 100.0)) {
    throw Error(ErrorKind::Validation, "staging thresholds must satisfy 0 < stage1 < stage2 < 100");
  }
  if (!finite(no_loss_max_mm) || !(no_loss_max_mm > 0.0)) {
    throw Error(ErrorKind::Validation, "no-bone-loss limit must be positive");
  }
  if (!finite(boundary_band_percent) || boundary_band_percent < 0.0) {
    throw Error(ErrorKind::Validation, "boundary band must be >= 0");
  }
}

SiteStage stage_site(double rbl_percent, std::optional<double> cej_bone_mm, const StagingPolicy& policy) {
  if (!(rbl_percent >= 0.0 && rbl_percent <= 100.0)) {
    throw Error(ErrorKind::Precondition, "RBL% outside [0, 100]");
  }
  SiteStage out;
  if (cej_bone_mm) {
    if (*cej_bone_mm < policy.no_loss_max_mm) return out;
  } else {
    out.mm_rule_skipped = true;
  }
  if (rbl_percent < policy.stage1_max_percent) {
    out.stage = RblStage::StageI;
  } else if (rbl_percent <= policy.stage2_max_percent) {
    out.stage = RblStage::StageII;
  } else {
    out.stage = RblStage::StageIII;
  }
  return out;
}

std::optional<RblStage> stage_tooth(std::optional<RblStage> a, std::optional<RblStage> b) {
  if (!a) return b;
  if (!b) return a;
  return std::max(*a, *b);
}

bool boundary_flag(double rbl_percent, const StagingPolicy& policy) {
  return std::abs(rbl_percent - policy.stage1_max_percent) <= policy.boundary_band_percent ||
         std::abs(rbl_percent - policy.stage2_max_percent) <= policy.boundary_band_percent;
}

void stage_assessment(ToothAssessment& tooth, const StagingPolicy& policy) {
  tooth.rbl_percent.reset();
  tooth.stage.reset();
  tooth.max_len1_mm.reset();
  tooth.boundary_flag = false;
  for (auto& site : tooth.sites) {
    site.stage.reset();
    if (!site.usable()) continue;
    const SiteStage s = stage_site(*site.rbl_percent, site.len1_mm, policy);
    site.stage = s.stage;
    if (s.mm_rule_skipped) site.add_reason(reason::kMmRuleSkipped);
    tooth.stage = stage_tooth(tooth.stage, site.stage);
    tooth.rbl_percent = std::max(tooth.rbl_percent.value_or(0.0), *site.rbl_percent);
    if (site.len1_mm) tooth.max_len1_mm = std::max(tooth.max_len1_mm.value_or(0.0), *site.len1_mm);
  }
  if (tooth.rbl_percent) tooth.boundary_flag = boundary_flag(*tooth.rbl_percent, policy);
}

bool stages_within_one(RblStage a, RblStage b) {
  return std::abs(static_cast<int>(a) - static_cast<int>(b)) <= 1;
}

bool stages_agree_within_tolerance(RblStage pred, std::optional<double> pred_rbl, RblStage ref,
                                   std::optional<double> ref_rbl, double tolerance_percent,
                                   const StagingPolicy& policy) {
  if (pred == ref) return true;
  const int a = static_cast<int>(pred), b = static_cast<int>(ref);
  if (std::min(a, b) < 1 || std::abs(a - b) != 1) return false;
  const double t = std::min(a, b) == 1 ? policy.stage1_max_percent : policy.stage2_max_percent;
  auto near = [&](const std::optional<double>& v) { return v && std::abs(*v - t) <= tolerance_percent; };
  return near(pred_rbl) || near(ref_rbl);
}

}  // namespace rbl
