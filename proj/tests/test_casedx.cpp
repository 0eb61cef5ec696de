#include <algorithm>
#include <random>

#include "doctest.h"
#include "rbl/casedx.hpp"
#include "rbl/error.hpp"
#include "rbl/staging.hpp"

using namespace rbl;

namespace {

ToothAssessment tooth(ToothNumber n, std::optional<double> rbl, const std::string& image = "a", double mm = 3.0) {
  ToothAssessment t;
  t.tooth = n;
  t.label = n.fdi_code();
  t.image_id = image;
  t.rbl_percent = rbl;
  if (rbl) {
    t.max_len1_mm = mm;
    t.stage = stage_site(*rbl, mm).stage;
  }
  return t;
}

CaseAssessment make_case(const std::vector<std::pair<int, double>>& fdi_rbl, std::optional<int> age = 45) {
  std::vector<ToothAssessment> v;
  for (auto [fdi, rbl] : fdi_rbl) v.push_back(tooth(ToothNumber::fdi(fdi), rbl, "a", rbl < 5.0 ? 1.0 : 3.0));
  return merge_across_images(v, "c", age);
}

}  // namespace

TEST_CASE("merge keeps the worst measurement") {
  const std::vector<ToothAssessment> v = {
      tooth(ToothNumber::fdi(11), 12.0, "a"), tooth(ToothNumber::fdi(11), 20.0, "b"),
      tooth(ToothNumber::fdi(21), std::nullopt, "a"), tooth(ToothNumber::fdi(21), 8.0, "c"),
      tooth(ToothNumber::fdi(22), std::nullopt, "c"), tooth(ToothNumber::fdi(22), std::nullopt, "b")};
  const CaseAssessment c = merge_across_images(v);
  REQUIRE(c.teeth.size() == 3);
  CHECK(c.teeth[0].assessment.image_id == "b");
  CHECK(c.teeth[0].images == std::vector<std::string>{"a", "b"});
  CHECK(c.teeth[1].assessment.image_id == "c");
  CHECK(c.teeth[2].assessment.image_id == "b");  // never measured: first by image id
  CHECK(c.assessed().size() == 2);

  // ties go to the smaller image id
  const std::vector<ToothAssessment> tie = {tooth(ToothNumber::fdi(11), 20.0, "z"), tooth(ToothNumber::fdi(11), 20.0, "m")};
  CHECK(merge_across_images(tie).teeth[0].assessment.image_id == "m");
}

TEST_CASE("merge is order independent") {
  std::vector<ToothAssessment> v;
  std::mt19937 rng(4);
  for (int k = 0; k < 40; ++k) {
    const int fdi = 11 + k % 7;
    v.push_back(tooth(ToothNumber::fdi(fdi), (k * 7) % 40, "img" + std::to_string(k % 5)));
    v.back().label = fdi;
  }
  const CaseAssessment ref = merge_across_images(v);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(v.begin(), v.end(), rng);
    const CaseAssessment c = merge_across_images(v);
    REQUIRE(c.teeth.size() == ref.teeth.size());
    for (std::size_t i = 0; i < c.teeth.size(); ++i) {
      CHECK(c.teeth[i].assessment.image_id == ref.teeth[i].assessment.image_id);
      CHECK(c.teeth[i].assessment.rbl_percent == ref.teeth[i].assessment.rbl_percent);
      CHECK(c.teeth[i].images == ref.teeth[i].images);
    }
  }
}

TEST_CASE("merge rejects a label naming two teeth") {
  auto a = tooth(ToothNumber::fdi(11), 10.0, "x");
  auto b = tooth(ToothNumber::fdi(12), 10.0, "x");
  a.label = b.label = 3;
  CHECK_THROWS_AS(merge_across_images(std::vector{a, b}), Error);
}

TEST_CASE("periodontitis needs two non-adjacent affected teeth") {
  auto pair = [](ToothNumber a, ToothNumber b) {
    return merge_across_images(std::vector{tooth(a, 20.0), tooth(b, 20.0), tooth(ToothNumber::fdi(44), 2.0, "a", 0.5)});
  };
  CHECK(is_periodontitis_case(pair(ToothNumber::universal(19), ToothNumber::universal(30))));
  CHECK_FALSE(is_periodontitis_case(pair(ToothNumber::universal(8), ToothNumber::universal(9))));
  CHECK_FALSE(is_periodontitis_case(pair(ToothNumber::fdi(36), ToothNumber::fdi(37))));
  CHECK(is_periodontitis_case(pair(ToothNumber::fdi(36), ToothNumber::fdi(38))));
  CHECK_FALSE(is_periodontitis_case(make_case({{11, 20.0}, {14, 2.0}})));
}

TEST_CASE("case stage") {
  const CaseAssessment c = make_case({{11, 40.0}, {13, 20.0}, {15, 22.0}, {17, 2.0}});
  CHECK(case_stage(c) == RblStage::StageIII);
  DiagnosisPolicy two;
  two.min_teeth_at_stage = 2;
  CHECK(case_stage(c, two) == RblStage::StageII);
  two.min_teeth_at_stage = 4;
  CHECK(case_stage(c, two) == RblStage::StageI);  // fallback
}

TEST_CASE("extent") {
  std::vector<std::pair<int, double>> teeth;
  const int fdis[] = {11, 12, 13, 14, 15, 16, 17, 21, 22, 23, 24, 25, 26, 27,
                      31, 32, 33, 34, 35, 36, 37, 41, 42, 43, 44, 45, 46, 47};
  for (int i = 0; i < 28; ++i) teeth.push_back({fdis[i], i < 10 ? 25.0 : 2.0});
  const auto e10 = case_extent(make_case(teeth), RblStage::StageII);
  CHECK(e10.affected == 10);
  CHECK(e10.assessed == 28);
  CHECK(e10.extent == Extent::Generalized);
  for (int i = 2; i < 10; ++i) teeth[i].second = 2.0;
  CHECK(case_extent(make_case(teeth), RblStage::StageII).extent == Extent::Localized);

  // exactly 30% is generalized
  std::vector<std::pair<int, double>> ten;
  for (int i = 0; i < 10; ++i) ten.push_back({fdis[i], i < 3 ? 25.0 : 2.0});
  const auto e = case_extent(make_case(ten), RblStage::StageII);
  CHECK(e.fraction == doctest::Approx(0.3));
  CHECK(e.extent == Extent::Generalized);

  // only teeth at the case stage count unless the policy says otherwise
  std::vector<std::pair<int, double>> mixed;
  for (int i = 0; i < 10; ++i) mixed.push_back({fdis[i], i == 0 ? 40.0 : (i < 4 ? 20.0 : 2.0)});
  CHECK(case_extent(make_case(mixed), RblStage::StageIII).affected == 1);
  DiagnosisPolicy any;
  any.extent_counts_any_stage = true;
  CHECK(case_extent(make_case(mixed), RblStage::StageIII, any).affected == 4);

  CHECK_THROWS_AS(case_extent(CaseAssessment{}, RblStage::StageI), Error);
}

TEST_CASE("grade") {
  CHECK(grade_from_ratio(50.0 / 40.0).grade == Grade::C);
  CHECK(grade_from_ratio(30.0 / 65.0).grade == Grade::B);
  CHECK(grade_from_ratio(10.0 / 60.0).grade == Grade::A);
  CHECK(grade_from_ratio(0.25).grade == Grade::B);
  CHECK(grade_from_ratio(1.0).grade == Grade::B);
  CHECK(case_grade(make_case({{11, 50.0}, {13, 20.0}}, 40))->grade == Grade::C);
  CHECK_FALSE(case_grade(make_case({{11, 50.0}, {13, 20.0}}, std::nullopt)));
}

TEST_CASE("diagnose") {
  const CaseDiagnosis d = diagnose(make_case({{11, 40.0}, {13, 20.0}, {15, 2.0}, {17, 2.0}}, 45));
  CHECK(d.is_periodontitis);
  CHECK(d.stage == RblStage::StageIII);
  CHECK(d.extent == Extent::Localized);  // 1 of 4
  CHECK(d.grade == Grade::B);
  CHECK(d.worst_teeth == std::vector<int>{11});
  CHECK(d.affected_teeth == 1);
  CHECK(d.assessed_teeth == 4);

  const CaseDiagnosis no_age = diagnose(make_case({{11, 40.0}, {13, 20.0}}, std::nullopt));
  CHECK(no_age.is_periodontitis);
  CHECK_FALSE(no_age.grade);
  CHECK(std::find(no_age.flags.begin(), no_age.flags.end(), "age-missing") != no_age.flags.end());

  const CaseDiagnosis healthy = diagnose(make_case({{11, 2.0}, {13, 3.0}}, 45));
  CHECK_FALSE(healthy.is_periodontitis);
  CHECK_FALSE(healthy.stage);
  CHECK_FALSE(healthy.extent);
  CHECK_FALSE(healthy.grade);
}
