#include "doctest.h"
#include "rbl/error.hpp"
#include "rbl/staging.hpp"

using namespace rbl;

TEST_CASE("published measurements") {
  CHECK(stage_site(12.11, 1.73).stage == RblStage::StageI);
  CHECK(stage_site(36.12, 4.71).stage == RblStage::StageIII);
  CHECK(stage_site(20.0, 1.2).stage == RblStage::NoBoneLoss);
}

TEST_CASE("thresholds are inclusive where stated") {
  CHECK(stage_site(14.99, 2.0).stage == RblStage::StageI);
  CHECK(stage_site(15.0, 2.0).stage == RblStage::StageII);
  CHECK(stage_site(33.0, 2.0).stage == RblStage::StageII);
  CHECK(stage_site(33.01, 2.0).stage == RblStage::StageIII);
  CHECK(stage_site(10.0, 1.49).stage == RblStage::NoBoneLoss);
  CHECK(stage_site(10.0, 1.5).stage == RblStage::StageI);
  CHECK(stage_site(0.0, 1.5).stage == RblStage::StageI);
}

TEST_CASE("without a millimetre length the percentage decides") {
  const SiteStage s = stage_site(5.0, std::nullopt);
  CHECK(s.stage == RblStage::StageI);
  CHECK(s.mm_rule_skipped);
  CHECK_FALSE(stage_site(5.0, 3.0).mm_rule_skipped);
}

TEST_CASE("grid property") {
  // stage follows the rule everywhere on a fine grid
  for (int r = 0; r <= 10000; ++r) {
    const double rbl = r * 0.01;
    for (double mm : {0.0, 1.0, 1.49, 1.5, 1.51, 8.0}) {
      const RblStage s = stage_site(rbl, mm).stage;
      RblStage want = mm < 1.5 ? RblStage::NoBoneLoss
                      : rbl < 15.0 ? RblStage::StageI
                      : rbl <= 33.0 ? RblStage::StageII
                                    : RblStage::StageIII;
      REQUIRE(s == want);
    }
  }
}

TEST_CASE("stage_tooth takes the worse site") {
  CHECK(stage_tooth(RblStage::StageI, RblStage::StageIII) == RblStage::StageIII);
  CHECK(stage_tooth(std::nullopt, RblStage::StageII) == RblStage::StageII);
  CHECK(stage_tooth(RblStage::NoBoneLoss, std::nullopt) == RblStage::NoBoneLoss);
  CHECK_FALSE(stage_tooth(std::nullopt, std::nullopt));
}

TEST_CASE("boundary flag") {
  CHECK(boundary_flag(14.0));
  CHECK_FALSE(boundary_flag(24.0));
  CHECK(boundary_flag(36.0));
  CHECK(boundary_flag(12.0));   // band edge is inclusive
  CHECK_FALSE(boundary_flag(11.99));
  CHECK(boundary_flag(30.0));
}

TEST_CASE("stage_assessment") {
  ToothAssessment t;
  SiteMeasurement a, b;
  a.rbl_percent = 10.0;
  a.len1_mm = 1.2;
  b.rbl_percent = 20.0;
  b.len1_mm = 2.5;
  t.sites = {a, b};
  stage_assessment(t);
  CHECK(t.sites[0].stage == RblStage::NoBoneLoss);
  CHECK(t.sites[1].stage == RblStage::StageII);
  CHECK(t.stage == RblStage::StageII);
  CHECK(*t.rbl_percent == 20.0);
  CHECK(*t.max_len1_mm == 2.5);
  CHECK_FALSE(t.boundary_flag);

  // a blocked site contributes nothing
  t.sites[1].add_reason(reason::kBoneBeyondApex);
  stage_assessment(t);
  CHECK(t.stage == RblStage::NoBoneLoss);
  CHECK(*t.rbl_percent == 10.0);

  t.sites[0].add_reason(reason::kNoCej);
  stage_assessment(t);
  CHECK_FALSE(t.measurable());
}

TEST_CASE("boundary tolerance") {
  CHECK(stages_agree_within_tolerance(RblStage::StageII, 16.0, RblStage::StageI, 14.0, 3.0));
  CHECK(stages_agree_within_tolerance(RblStage::StageIII, 35.5, RblStage::StageII, 28.0, 3.0));
  CHECK_FALSE(stages_agree_within_tolerance(RblStage::StageIII, 40.0, RblStage::StageII, 25.0, 3.0));
  CHECK_FALSE(stages_agree_within_tolerance(RblStage::StageIII, 34.0, RblStage::StageI, 14.0, 3.0));
  CHECK_FALSE(stages_agree_within_tolerance(RblStage::StageI, 10.0, RblStage::NoBoneLoss, 10.0, 3.0));
  CHECK(stages_agree_within_tolerance(RblStage::StageI, 10.0, RblStage::StageI, 1.0, 0.0));
  CHECK_FALSE(stages_agree_within_tolerance(RblStage::StageII, 15.5, RblStage::StageI, 14.0, 0.0));
  CHECK(stages_agree_within_tolerance(RblStage::StageII, 15.0, RblStage::StageI, 14.0, 0.0));  // on the threshold
  CHECK(stages_within_one(RblStage::NoBoneLoss, RblStage::StageI));
  CHECK_FALSE(stages_within_one(RblStage::NoBoneLoss, RblStage::StageII));
}

TEST_CASE("policy validation") {
  StagingPolicy p;
  CHECK_NOTHROW(p.validate());
  p.stage1_max_percent = 40.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.no_loss_max_mm = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
}
