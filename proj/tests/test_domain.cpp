#include <cmath>

#include "doctest.h"
#include "rbl/domain.hpp"
#include "rbl/error.hpp"

using namespace rbl;

namespace {

ImageRecord blank_record(int w, int h) {
  ImageRecord r;
  r.image_id = "img";
  r.bone_mask = BinaryMask(w, h);
  r.tooth_mask = ToothLabelMask(w, h);
  r.cej_mask = BinaryMask(w, h);
  return r;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("px_vector_to_mm") {
  CHECK(px_vector_to_mm(0, 30, PixelSpacing::isotropic(0.1)) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(px_vector_to_mm(0, 0, PixelSpacing::create(0.3, 0.7)) == 0.0);
  CHECK(px_vector_to_mm(3, 4, PixelSpacing::isotropic(1.0)) == doctest::Approx(5.0).epsilon(1e-12));
  // x scales with column spacing, y with row spacing
  CHECK(px_vector_to_mm(10, 0, PixelSpacing::create(0.1, 0.2)) == doctest::Approx(2.0));
  CHECK(px_vector_to_mm(0, 10, PixelSpacing::create(0.1, 0.2)) == doctest::Approx(1.0));
}

TEST_CASE("pixel spacing must be positive and finite") {
  CHECK(kind_of([] { PixelSpacing::create(0.0, 0.1); }) == ErrorKind::Validation);
  CHECK(kind_of([] { PixelSpacing::create(0.1, -1.0); }) == ErrorKind::Validation);
  CHECK(kind_of([] { PixelSpacing::create(INFINITY, 0.1); }) == ErrorKind::Validation);
  CHECK(kind_of([] { PixelSpacing::create(NAN, 0.1); }) == ErrorKind::Validation);
}

TEST_CASE("tooth numbering round trip") {
  CHECK(universal_to_fdi(1) == 18);
  CHECK(universal_to_fdi(8) == 11);
  CHECK(universal_to_fdi(9) == 21);
  CHECK(universal_to_fdi(16) == 28);
  CHECK(universal_to_fdi(17) == 38);
  CHECK(universal_to_fdi(24) == 31);
  CHECK(universal_to_fdi(25) == 41);
  CHECK(universal_to_fdi(32) == 48);
  for (int u = 1; u <= 32; ++u) CHECK(fdi_to_universal(universal_to_fdi(u)) == u);

  const ToothNumber t = ToothNumber::universal(30);
  CHECK(t.fdi_code() == 46);
  CHECK(t.entered() == 30);
  CHECK(t.system() == NumberingSystem::Universal);
  CHECK_FALSE(t.is_upper());
  CHECK(t.is_patient_right());
  CHECK(kind_of([] { ToothNumber::fdi(19); }) == ErrorKind::Validation);
  CHECK(kind_of([] { ToothNumber::universal(33); }) == ErrorKind::Validation);
  CHECK(parse_numbering_system("fdi") == NumberingSystem::FDI);
  CHECK(parse_numbering_system("Universal") == NumberingSystem::Universal);
}

TEST_CASE("arch sequence and adjacency") {
  CHECK(ToothNumber::fdi(18).arch_index() == 0);
  CHECK(ToothNumber::fdi(11).arch_index() == 7);
  CHECK(ToothNumber::fdi(21).arch_index() == 8);
  CHECK(ToothNumber::fdi(28).arch_index() == 15);
  CHECK(teeth_adjacent(ToothNumber::fdi(11), ToothNumber::fdi(21)));
  CHECK(teeth_adjacent(ToothNumber::fdi(46), ToothNumber::fdi(47)));
  CHECK(teeth_adjacent(ToothNumber::universal(8), ToothNumber::universal(9)));
  CHECK_FALSE(teeth_adjacent(ToothNumber::fdi(13), ToothNumber::fdi(15)));
  CHECK_FALSE(teeth_adjacent(ToothNumber::fdi(11), ToothNumber::fdi(41)));
  CHECK_FALSE(teeth_adjacent(ToothNumber::fdi(18), ToothNumber::fdi(28)));
  // symmetric over the whole dentition
  for (int q1 = 1; q1 <= 4; ++q1) {
    for (int p1 = 1; p1 <= 8; ++p1) {
      for (int q2 = 1; q2 <= 4; ++q2) {
        for (int p2 = 1; p2 <= 8; ++p2) {
          const auto a = ToothNumber::fdi(10 * q1 + p1), b = ToothNumber::fdi(10 * q2 + p2);
          CHECK(teeth_adjacent(a, b) == teeth_adjacent(b, a));
        }
      }
    }
  }
}

TEST_CASE("stage order and names") {
  CHECK(RblStage::NoBoneLoss < RblStage::StageI);
  CHECK(RblStage::StageI < RblStage::StageII);
  CHECK(RblStage::StageII < RblStage::StageIII);
  for (auto s : {RblStage::NoBoneLoss, RblStage::StageI, RblStage::StageII, RblStage::StageIII}) {
    CHECK(parse_stage(to_string(s)) == s);
  }
}

TEST_CASE("validate_image_record") {
  SUBCASE("matching dimensions") {
    auto r = blank_record(100, 80);
    const auto v = validate_image_record(r);
    CHECK(v.record().width() == 100);
    CHECK(v.limitations().size() == 1);  // no spacing
  }
  SUBCASE("dimension mismatch") {
    auto r = blank_record(100, 80);
    r.tooth_mask = ToothLabelMask(99, 80);
    CHECK(kind_of([&] { validate_image_record(r); }) == ErrorKind::Structural);
  }
  SUBCASE("label missing from table") {
    auto r = blank_record(100, 80);
    r.tooth_mask.set(5, 5, 7);
    CHECK(kind_of([&] { validate_image_record(r); }) == ErrorKind::Structural);
    r.tooth_table.push_back({7, ToothNumber::fdi(11), false});
    CHECK_NOTHROW(validate_image_record(r));
  }
  SUBCASE("duplicate tooth") {
    auto r = blank_record(10, 10);
    r.tooth_table.push_back({1, ToothNumber::fdi(11), false});
    r.tooth_table.push_back({2, ToothNumber::universal(8), false});
    CHECK(kind_of([&] { validate_image_record(r); }) == ErrorKind::Structural);
  }
  SUBCASE("disconnected tooth is reported") {
    auto r = blank_record(20, 20);
    r.tooth_mask.set(1, 1, 1);
    r.tooth_mask.set(10, 10, 1);
    r.tooth_table.push_back({1, ToothNumber::fdi(11), false});
    CHECK(validate_image_record(r).warnings().size() == 1);
    r.tooth_table[0].allow_disconnected = true;
    CHECK(validate_image_record(r).warnings().empty());
  }
}

TEST_CASE("site reliability") {
  SiteMeasurement s;
  s.rbl_percent = 10.0;
  CHECK(s.usable());
  CHECK(s.reliable());
  s.add_reason(reason::kNoSpacing);
  CHECK(s.usable());
  CHECK_FALSE(s.reliable());
  s.add_reason(reason::kBoneBeyondApex);
  CHECK_FALSE(s.usable());
  CHECK(is_blocking_reason(reason::kNoCej));
  CHECK_FALSE(is_blocking_reason(reason::kNeighborOverlap));
}
