#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rbl/geometry.hpp"
#include "rbl/ingest.hpp"
#include "rbl/phantom.hpp"
#include "test_util.hpp"

using namespace rbl;

namespace {

std::vector<Pixel> pixels_of(const BinaryMask& m) {
  std::vector<Pixel> out;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.get(x, y)) out.push_back({x, y});
    }
  }
  return out;
}

// Direction of maximal projected variance by scanning angles in 0.01 degree steps.
double variance_scan_angle(const std::vector<Pixel>& px) {
  double mx = 0, my = 0;
  for (const auto& p : px) {
    mx += p.x + 0.5;
    my += p.y + 0.5;
  }
  mx /= px.size();
  my /= px.size();
  double best = -1.0, best_angle = 0.0;
  for (int k = 0; k < 18000; ++k) {
    const double a = k * 0.01 * std::numbers::pi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    double v = 0.0;
    for (const auto& p : px) {
      const double proj = (p.x + 0.5 - mx) * c + (p.y + 0.5 - my) * s;
      v += proj * proj;
    }
    if (v > best) {
      best = v;
      best_angle = k * 0.01;
    }
  }
  return best_angle;
}

double angle_mod180(const Point2& d) {
  double a = std::atan2(d.y, d.x) * 180.0 / std::numbers::pi;
  while (a < 0.0) a += 180.0;
  while (a >= 180.0) a -= 180.0;
  return a;
}

double angle_gap(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

PhantomImageSpec single_tooth(double angle, double drop_left, double drop_right, int roots = 1) {
  PhantomImageSpec spec;
  spec.image_id = "one";
  spec.arch = Arch::Mandible;
  spec.spacing = PixelSpacing::isotropic(0.07);
  ToothSpec t;
  t.tooth = ToothNumber::fdi(roots == 2 ? 46 : 43);
  t.angle_deg = angle;
  t.root_count = roots;
  if (roots == 2) {
    t.crown_width_mm = 10.0;
    t.apex_offset_left_mm = 1.0;
    t.apex_offset_right_mm = 0.5;
  }
  t.drop_left = drop_left;
  t.drop_right = drop_right;
  spec.teeth.push_back(t);
  layout_teeth(spec);
  return spec;
}

double dist(const Point2& a, const Point2& b) { return (a - b).norm(); }

ImageRecord mirror(const ImageRecord& r) {
  ImageRecord m = r;
  const int w = r.width(), h = r.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      m.bone_mask.set(w - 1 - x, y, r.bone_mask.get(x, y));
      m.cej_mask.set(w - 1 - x, y, r.cej_mask.get(x, y));
      m.tooth_mask.set(w - 1 - x, y, r.tooth_mask.get(x, y));
    }
  }
  return m;
}

}  // namespace

TEST_CASE("axis of an upright rectangle") {
  const BinaryMask rect = testutil::rect_mask(40, 220, 10, 10, 29, 209);
  const auto px = pixels_of(rect);
  const std::vector<Point2> cej = {{10.5, 20.5}, {29.5, 20.5}};
  const AxisOutcome out = tooth_axis(px, cej);
  REQUIRE(out.axis);
  CHECK(out.axis->direction.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.axis->direction.y == doctest::Approx(1.0));
  CHECK(out.axis->normal.x > 0.0);
  CHECK(out.axis->centroid.y == doctest::Approx(110.0));

  // CEJ near the bottom flips the orientation
  const std::vector<Point2> low = {{10.5, 200.5}};
  CHECK(tooth_axis(px, low).axis->direction.y == doctest::Approx(-1.0));
  // bone contact decides when given
  const std::vector<Point2> bone = {{10.5, 60.5}};
  CHECK(tooth_axis(px, cej, {}, bone).axis->direction.y == doctest::Approx(1.0));
}

TEST_CASE("axis of a rotated rectangle matches a variance scan") {
  for (double deg : {30.0, -17.0, 63.0}) {
    const double a = deg * std::numbers::pi / 180.0;
    const Point2 c{100.0, 100.0}, u{std::sin(a), std::cos(a)}, v{std::cos(a), -std::sin(a)};
    std::vector<Point2> poly;
    for (auto [su, sv] : {std::pair{-80.0, -12.0}, {-80.0, 12.0}, {80.0, 12.0}, {80.0, -12.0}}) {
      poly.push_back(c + u * su + v * sv);
    }
    const BinaryMask m = rasterize_polygon(poly, 200, 200);
    const auto px = pixels_of(m);
    const std::vector<Point2> cej = {c - u * 60.0};
    const AxisOutcome out = tooth_axis(px, cej);
    REQUIRE(out.axis);
    CHECK(angle_gap(angle_mod180(out.axis->direction), variance_scan_angle(px)) < 1.0);
    CHECK(out.axis->direction.dot(u) > 0.99);
  }
}

TEST_CASE("axis failures") {
  const auto square = pixels_of(testutil::rect_mask(60, 60, 5, 5, 54, 54));
  const std::vector<Point2> cej = {{5.5, 5.5}};
  CHECK(tooth_axis(square, cej).reason == reason::kAxisUndefined);
  const auto tiny = pixels_of(testutil::rect_mask(10, 10, 0, 0, 1, 8));
  CHECK(tooth_axis(tiny, cej).reason == reason::kToothTooSmall);
  const auto rect = pixels_of(testutil::rect_mask(40, 220, 10, 10, 29, 209));
  CHECK(tooth_axis(rect, {}).reason == reason::kNoCej);
}

TEST_CASE("measure_site example") {
  ToothAxis axis;
  axis.centroid = {10.0, 100.0};
  axis.direction = {0.0, 1.0};
  axis.normal = {1.0, 0.0};
  const auto s = measure_site({10, 10}, {10, 40}, {10, 210}, axis, PixelSpacing::isotropic(0.1));
  CHECK(s.len1_mm.value() == doctest::Approx(3.0));
  CHECK(s.len2_mm.value() == doctest::Approx(20.0));
  CHECK(s.rbl_percent.value() == doctest::Approx(15.0));
  CHECK(s.reliable());

  // rotating the whole configuration leaves the lengths unchanged
  const double a = 25.0 * std::numbers::pi / 180.0;
  auto rot = [&](Point2 p) { return Point2{p.x * std::cos(a) - p.y * std::sin(a), p.x * std::sin(a) + p.y * std::cos(a)}; };
  ToothAxis r = axis;
  r.centroid = rot(axis.centroid);
  r.direction = rot(axis.direction);
  r.normal = rot(axis.normal);
  const auto t = measure_site(rot({10, 10}), rot({10, 40}), rot({10, 210}), r, PixelSpacing::isotropic(0.1));
  CHECK(std::abs(*t.len1_mm - 3.0) < 0.05);
  CHECK(std::abs(*t.len2_mm - 20.0) < 0.05);

  const auto beyond = measure_site({10, 10}, {10, 250}, {10, 210}, axis, PixelSpacing::isotropic(0.1));
  CHECK(beyond.has_reason(reason::kBoneBeyondApex));
  CHECK_FALSE(beyond.usable());
  const auto inverted = measure_site({10, 220}, {10, 230}, {10, 210}, axis, std::nullopt);
  CHECK(inverted.has_reason(reason::kCejApicalOfApex));
  CHECK(inverted.has_reason(reason::kNoSpacing));
  const auto nospacing = measure_site({10, 10}, {10, 40}, {10, 210}, axis, std::nullopt);
  CHECK(nospacing.usable());
  CHECK_FALSE(nospacing.reliable());
  CHECK_FALSE(nospacing.len1_mm);
}

TEST_CASE("tooth_rbl_percent") {
  SiteMeasurement a, b;
  a.rbl_percent = 12.0;
  b.rbl_percent = 30.0;
  CHECK(*tooth_rbl_percent(std::vector{a, b}) == 30.0);
  b.add_reason(reason::kBoneBeyondApex);
  CHECK(*tooth_rbl_percent(std::vector{a, b}) == 12.0);
  a.add_reason(reason::kNoCej);
  CHECK_FALSE(tooth_rbl_percent(std::vector{a, b}));
}

TEST_CASE("map_site_side") {
  const auto t11 = ToothNumber::fdi(11), t21 = ToothNumber::fdi(21), t46 = ToothNumber::fdi(46);
  CHECK(map_site_side(ImageSide::Right, t11, Arch::Maxilla, Laterality::Unknown) == SiteSide::Mesial);
  CHECK(map_site_side(ImageSide::Left, t11, Arch::Maxilla, Laterality::Unknown) == SiteSide::Distal);
  CHECK(map_site_side(ImageSide::Left, t21, Arch::Unknown, Laterality::Unknown) == SiteSide::Mesial);
  CHECK(map_site_side(ImageSide::Left, t46, Arch::Maxilla, Laterality::Unknown) == SiteSide::LeftUnmapped);
  CHECK(map_site_side(ImageSide::Right, t46, Arch::Mandible, Laterality::Left) == SiteSide::RightUnmapped);
  CHECK(map_site_side(ImageSide::Right, t46, Arch::Mandible, Laterality::Right) == SiteSide::Mesial);
  // incisors may appear on either lateral view
  CHECK(map_site_side(ImageSide::Right, t11, Arch::Maxilla, Laterality::Left) == SiteSide::Mesial);
}

TEST_CASE("phantom landmarks are recovered") {
  for (double angle : {0.0, 12.0, -22.0}) {
    const PhantomImage img = generate_image(single_tooth(angle, 0.2, 0.45), 3);
    const auto teeth = measure_image(img.record);
    REQUIRE(teeth.size() == 1);
    const auto& truth = img.truth[0];
    for (int k = 0; k < 2; ++k) {
      const SiteMeasurement& s = teeth[0].sites[k];
      REQUIRE(s.usable());
      CHECK(dist(*s.cej_point, truth.sites[k].cej) < 1.5);
      CHECK(dist(*s.bone_point, truth.sites[k].bone) < 1.5);
      CHECK(std::abs(*s.rbl_percent - truth.sites[k].rbl_percent) < 2.0);
    }
    // single root: both sides find the tip at the same depth
    const Point2 d = truth.sites[0].apex - (truth.sites[0].cej + truth.sites[1].cej) * 0.5;
    const Point2 u = d * (1.0 / d.norm());
    const double depth0 = (*teeth[0].sites[0].apex_point - truth.sites[0].apex).dot(u);
    const double depth1 = (*teeth[0].sites[1].apex_point - truth.sites[1].apex).dot(u);
    CHECK(std::abs(depth0 - depth1) <= 1.0);
    CHECK(std::abs(depth0) < 1.5);
  }
}

TEST_CASE("mirrored image swaps the sites") {
  const PhantomImage img = generate_image(single_tooth(8.0, 0.15, 0.5), 11);
  const auto a = measure_image(img.record);
  const auto b = measure_image(mirror(img.record));
  REQUIRE(a.size() == 1);
  REQUIRE(b.size() == 1);
  CHECK(*b[0].sites[0].rbl_percent == doctest::Approx(*a[0].sites[1].rbl_percent).epsilon(0.01));
  CHECK(*b[0].sites[1].rbl_percent == doctest::Approx(*a[0].sites[0].rbl_percent).epsilon(0.01));
}

TEST_CASE("unmeasurable configurations") {
  PhantomImage img = generate_image(single_tooth(0.0, 0.2, 0.2), 5);
  SUBCASE("no bone") {
    img.record.bone_mask = BinaryMask(img.record.width(), img.record.height());
    const auto t = measure_image(img.record);
    CHECK_FALSE(t[0].sites[0].usable());
    CHECK(t[0].sites[0].has_reason(reason::kNoBoneIntersection));
  }
  SUBCASE("no cej") {
    img.record.cej_mask = BinaryMask(img.record.width(), img.record.height());
    const auto t = measure_image(img.record);
    for (const auto& s : t[0].sites) CHECK(s.has_reason(reason::kNoCej));
  }
  SUBCASE("cej drawn inside the tooth only") {
    BinaryMask inner(img.record.width(), img.record.height());
    const auto region = img.record.tooth_mask.region(img.truth[0].label);
    // a short CEJ segment well inside the crown never reaches the tooth outline
    const Point2 c = img.truth[0].sites[0].cej * 0.5 + img.truth[0].sites[1].cej * 0.5;
    for (int dx = -2; dx <= 2; ++dx) inner.set(static_cast<int>(c.x) + dx, static_cast<int>(c.y) - 15);
    REQUIRE(region.get(static_cast<int>(c.x), static_cast<int>(c.y) - 15));
    img.record.cej_mask = inner;
    const auto t = measure_image(img.record);
    CHECK_FALSE(t[0].sites[0].usable());
    CHECK_FALSE(t[0].sites[1].usable());
    CHECK(t[0].sites[0].has_reason(reason::kNoCej));
  }
}

TEST_CASE("two-rooted tooth has an apex per root") {
  const PhantomImage img = generate_image(single_tooth(5.0, 0.3, 0.3, 2), 9);
  const auto teeth = measure_image(img.record);
  const auto& t = teeth[0];
  REQUIRE(t.sites[0].usable());
  REQUIRE(t.sites[1].usable());
  CHECK(dist(*t.sites[0].apex_point, *t.sites[1].apex_point) > 20.0);
  for (int k = 0; k < 2; ++k) {
    CHECK(dist(*t.sites[k].apex_point, img.truth[0].sites[k].apex) < 1.5);
    CHECK_FALSE(t.sites[k].has_reason(reason::kSingleRootFallback));
  }
}

TEST_CASE("apex on the image border is flagged") {
  PhantomImageSpec spec = single_tooth(0.0, 0.2, 0.2);
  spec.allow_truncation = true;
  spec.height -= 45;  // cut the root tips off
  const PhantomImage img = generate_image(spec, 1);
  const auto teeth = measure_image(img.record);
  REQUIRE(teeth.size() == 1);
  for (const auto& s : teeth[0].sites) CHECK(s.has_reason(reason::kApexAtBorder));
  CHECK(teeth[0].sites[0].usable());
  CHECK_FALSE(teeth[0].sites[0].reliable());
}

TEST_CASE("sites are ordered image-left first") {
  const PhantomImage img = random_phantom(42);
  for (const auto& t : measure_image(img.record)) {
    REQUIRE(t.sites.size() == 2);
    CHECK(t.sites[0].image_side == ImageSide::Left);
    CHECK(t.sites[1].image_side == ImageSide::Right);
  }
}
