#pragma once

#include <optional>

#include "rbl/domain.hpp"

namespace rbl {

struct StagingPolicy {
  double stage1_max_percent = 15.0;
  double stage2_max_percent = 33.0;
  double no_loss_max_mm = 1.5;
  double boundary_band_percent = 3.0;

  // Throws Error(Validation) unless 0 < stage1 < stage2 < 100, no_loss > 0, band >= 0.
  void validate() const;
};

struct SiteStage {
  RblStage stage = RblStage::NoBoneLoss;
  bool mm_rule_skipped = false;  // no millimetre length, percentage alone decided
};

// NoBoneLoss iff cej_bone_mm is known and < no_loss_max_mm. Otherwise stage I below
// stage1_max, stage II on [stage1_max, stage2_max] inclusive, stage III above.
SiteStage stage_site(double rbl_percent, std::optional<double> cej_bone_mm, const StagingPolicy& policy = {});

// Worse of the two site stages; nullopt when neither is staged.
std::optional<RblStage> stage_tooth(std::optional<RblStage> a, std::optional<RblStage> b);

// Within the band (inclusive) of either stage threshold.
bool boundary_flag(double rbl_percent, const StagingPolicy& policy = {});

// Stages every usable site, then sets the tooth RBL% (max over usable sites), tooth stage,
// boundary flag and max_len1_mm.
void stage_assessment(ToothAssessment& tooth, const StagingPolicy& policy = {});

// Equal or neighbouring in the stage order.
bool stages_within_one(RblStage a, RblStage b);

// Agreement under the boundary tolerance: equal stages, or neighbouring bone-loss stages
// whose separating threshold lies within `tolerance_percent` of either RBL%. The mm rule
// separating NoBoneLoss from StageI gets no tolerance.
bool stages_agree_within_tolerance(RblStage pred, std::optional<double> pred_rbl, RblStage ref,
                                   std::optional<double> ref_rbl, double tolerance_percent,
                                   const StagingPolicy& policy = {});

}  // namespace rbl
