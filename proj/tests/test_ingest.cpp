#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "rbl/ingest.hpp"
#include "rbl/png_io.hpp"
#include "rbl/report.hpp"
#include "test_util.hpp"

using namespace rbl;

namespace {

// Even-odd crossing test with on-edge points counted as inside.
bool inside_oracle(const std::vector<Point2>& poly, Point2 p) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = poly[i], b = poly[(i + 1) % n];
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross == 0.0 && p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
        p.y <= std::max(a.y, b.y)) {
      return true;
    }
  }
  bool in = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) in = !in;
    }
  }
  return in;
}

BinaryMask polygon_oracle(const std::vector<Point2>& poly, int w, int h) {
  BinaryMask m(w, h);
  if (std::abs(polygon_area(poly)) == 0.0) return m;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, inside_oracle(poly, {x + 0.5, y + 0.5}));
  }
  return m;
}

// Walks each segment through every grid-line crossing; between consecutive crossings the
// segment stays inside one half-open pixel box.
BinaryMask polyline_oracle(const std::vector<Point2>& pts, int w, int h) {
  BinaryMask m(w, h);
  auto mark = [&](Point2 p) {
    const int x = static_cast<int>(std::floor(p.x)), y = static_cast<int>(std::floor(p.y));
    if (m.in_bounds(x, y)) m.set(x, y);
  };
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Point2 a = pts[i], b = pts[i + 1];
    std::vector<double> ts{0.0, 1.0};
    for (int k = 0; k <= std::max(w, h); ++k) {
      if (b.x != a.x) ts.push_back((k - a.x) / (b.x - a.x));
      if (b.y != a.y) ts.push_back((k - a.y) / (b.y - a.y));
    }
    std::erase_if(ts, [](double t) { return t < 0.0 || t > 1.0; });
    std::sort(ts.begin(), ts.end());
    for (std::size_t k = 0; k < ts.size(); ++k) {
      mark({a.x + ts[k] * (b.x - a.x), a.y + ts[k] * (b.y - a.y)});
      if (k + 1 < ts.size()) {
        const double t = 0.5 * (ts[k] + ts[k + 1]);
        mark({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
      }
    }
  }
  return m;
}

std::vector<Point2> random_convex(std::mt19937_64& rng, double cx, double cy, double r) {
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi), rad(0.5 * r, r);
  std::vector<double> angles(7);
  for (auto& a : angles) a = ang(rng);
  std::sort(angles.begin(), angles.end());
  std::vector<Point2> pts;
  const double rr = rad(rng);
  for (double a : angles) pts.push_back({cx + rr * std::cos(a), cy + rr * std::sin(a)});
  return pts;
}

std::size_t count_of(const BinaryMask& m) { return m.count(); }

}  // namespace

TEST_CASE("polygon rasterization examples") {
  const std::vector<Point2> square{{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  const BinaryMask m = rasterize_polygon(square, 8, 8);
  CHECK(count_of(m) == 16);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) CHECK(m.get(x, y) == (x < 4 && y < 4));
  }
  CHECK(m == polygon_oracle(square, 8, 8));

  const std::vector<Point2> flat{{0, 0}, {2, 2}, {4, 4}};
  CHECK_FALSE(rasterize_polygon(flat, 8, 8).any());

  const std::vector<Point2> full{{0, 0}, {8, 0}, {8, 8}, {0, 8}};
  CHECK(count_of(rasterize_polygon(full, 8, 8)) == 64);
}

TEST_CASE("polygon rasterization matches point-in-polygon oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> coord(-3.0, 35.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Point2> poly;
    const int n = 3 + trial % 6;
    for (int i = 0; i < n; ++i) poly.push_back({coord(rng), coord(rng)});
    if (trial % 5 == 0) {
      for (auto& p : poly) p = {std::round(p.x * 2) / 2, std::round(p.y * 2) / 2};  // many on-edge centres
    }
    CHECK(rasterize_polygon(poly, 32, 32) == polygon_oracle(poly, 32, 32));
  }
}

TEST_CASE("polyline supercover examples") {
  const std::vector<Point2> horiz{{0.5, 2.5}, {6.5, 2.5}};
  const BinaryMask h = rasterize_polyline(horiz, 10, 10);
  CHECK(count_of(h) == 7);
  for (int x = 0; x <= 6; ++x) CHECK(h.get(x, 2));

  const std::vector<Point2> dot{{3.5, 3.5}, {3.5, 3.5}};
  const BinaryMask d = rasterize_polyline(dot, 10, 10);
  CHECK(count_of(d) == 1);
  CHECK(d.get(3, 3));

  const std::vector<Point2> diag{{0.5, 0.5}, {3.5, 3.5}};
  const BinaryMask g = rasterize_polyline(diag, 10, 10);
  CHECK(count_of(g) == 4);
  for (int k = 0; k < 4; ++k) CHECK(g.get(k, k));

  const std::vector<Point2> one{{1.0, 1.0}};
  CHECK_THROWS_AS(rasterize_polyline(one, 4, 4), Error);
}

TEST_CASE("polyline rasterization matches segment/box oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(0.0, 24.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Point2> pts;
    const int n = 2 + trial % 4;
    for (int i = 0; i < n; ++i) pts.push_back({coord(rng), coord(rng)});
    CHECK(rasterize_polyline(pts, 24, 24) == polyline_oracle(pts, 24, 24));
  }
}

TEST_CASE("rasterized area converges to polygon area") {
  std::mt19937_64 rng(99);
  const int resolutions[] = {16, 64, 256};
  double mean_err[3] = {0, 0, 0};
  const int polys = 20;
  for (int k = 0; k < polys; ++k) {
    const auto unit = random_convex(rng, 0.5, 0.5, 0.45);
    const double area = std::abs(polygon_area(unit));
    double errs[3];
    for (int r = 0; r < 3; ++r) {
      const int n = resolutions[r];
      std::vector<Point2> scaled;
      for (auto p : unit) scaled.push_back({p.x * n, p.y * n});
      const double px_area = 1.0 / (static_cast<double>(n) * n);
      errs[r] = std::abs(count_of(rasterize_polygon(scaled, n, n)) * px_area - area) / area;
      mean_err[r] += errs[r] / polys;
    }
    CHECK(errs[2] < errs[0]);
  }
  CHECK(mean_err[1] < mean_err[0]);
  CHECK(mean_err[2] < mean_err[1]);
}

TEST_CASE("annotation schema") {
  const std::string doc = R"({
    "image_id": "a1", "width": 20, "height": 20,
    "polygons": [
      {"kind": "bone_area", "points": [[0, 10], [20, 10], [20, 20], [0, 20]]},
      {"kind": "tooth", "label": 3, "points": [[5, 2], [9, 2], [9, 18], [5, 18]]},
      {"kind": "other", "name": "restoration", "points": [[1, 1], [2, 1], [2, 2]]}
    ],
    "polylines": [{"kind": "cej", "points": [[3.5, 6.5], [11.5, 6.5]]},
                  {"kind": "cej", "crown_margin": true, "points": [[30, 7.5], [12.5, 7.5]]}]
  })";
  std::vector<std::string> warnings;
  const AnnotationSet set = parse_annotation_set(doc, "test", &warnings);
  CHECK(warnings.size() == 1);  // x = 30 clamped
  const RasterizedAnnotations r = rasterize_annotations(set);
  CHECK(r.bone_mask.count() == 200);
  CHECK(r.tooth_mask.get(6, 10) == 3);
  CHECK(r.tooth_mask.get(1, 1) == 0);
  CHECK(r.other_rois.size() == 1);
  CHECK(r.cej_mask.get(3, 6));
  REQUIRE(r.crown_margin_mask);
  CHECK(r.crown_margin_mask->get(15, 7));
  CHECK_FALSE(r.crown_margin_mask->get(3, 6));

  CHECK_THROWS_AS(parse_annotation_set(R"({"image_id": "x", "width": 5})", "t"), Error);
  CHECK_THROWS_AS(parse_annotation_set(R"({"image_id": "x", "width": 5, "height": 5,
      "polygons": [{"kind": "tooth", "points": [[0,0],[1,0],[1,1]]}]})", "t"), Error);
}

namespace {

void write_image(const testutil::TempDir& dir, const std::string& id, int w, int h) {
  BinaryMask bone(w, h), cej(w, h);
  ToothLabelMask tooth(w, h);
  for (int y = h / 2; y < h; ++y) {
    for (int x = 0; x < w; ++x) bone.set(x, y);
  }
  for (int y = 5; y < h - 5; ++y) {
    for (int x = 10; x < 20; ++x) tooth.set(x, y, 1);
  }
  for (int x = 8; x < 22; ++x) cej.set(x, 12);
  png::write_binary_mask(dir / (id + "_bone.png"), bone);
  png::write_label_mask(dir / (id + "_tooth.png"), tooth);
  png::write_binary_mask(dir / (id + "_cej.png"), cej);
}

Json image_entry(const std::string& id) {
  Json e;
  e["image_id"] = id;
  e["bone_mask"] = id + "_bone.png";
  e["tooth_mask"] = id + "_tooth.png";
  e["cej_mask"] = id + "_cej.png";
  e["spacing"] = {{"row_mm_per_px", 0.1}, {"col_mm_per_px", 0.1}};
  e["arch"] = "maxilla";
  e["tooth_table"] = Json::array({{{"label", 1}, {"tooth", 11}}});
  return e;
}

}  // namespace

TEST_CASE("load_case") {
  testutil::TempDir dir("ingest");
  write_image(dir, "b", 30, 40);
  write_image(dir, "a", 30, 40);
  Json m;
  m["case_id"] = "c1";
  m["patient_age"] = 40;
  m["images"] = Json::array({image_entry("b"), image_entry("a")});
  write_text_file(dir / "manifest.json", m.dump());

  SUBCASE("two valid images, sorted by id") {
    const CaseRecord c = load_case(dir / "manifest.json");
    REQUIRE(c.images.size() == 2);
    CHECK(c.images[0].record().image_id == "a");
    CHECK(c.images[1].record().image_id == "b");
    CHECK(c.patient_age == 40);
    CHECK(c.images[0].record().tooth_table[0].number.fdi_code() == 11);
    // deterministic, also with several loader threads
    const CaseRecord again = load_case(dir / "manifest.json", LoadOptions{4});
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& x = c.images[i].record();
      const auto& y = again.images[i].record();
      CHECK(x.bone_mask == y.bone_mask);
      CHECK(x.tooth_mask == y.tooth_mask);
      CHECK(x.cej_mask == y.cej_mask);
      CHECK(x.spacing == y.spacing);
    }
  }
  SUBCASE("absent mask file") {
    m["images"][0]["bone_mask"] = "nope.png";
    write_text_file(dir / "manifest.json", m.dump());
    try {
      load_case(dir / "manifest.json");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MissingFile);
    }
  }
  SUBCASE("age zero") {
    m["patient_age"] = 0;
    write_text_file(dir / "manifest.json", m.dump());
    try {
      load_case(dir / "manifest.json");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Validation);
    }
  }
  SUBCASE("duplicate image id") {
    m["images"][0]["image_id"] = "a";
    write_text_file(dir / "manifest.json", m.dump());
    CHECK_THROWS_AS(load_case(dir / "manifest.json"), Error);
  }
  SUBCASE("missing manifest") { CHECK_THROWS_AS(load_case(dir / "absent.json"), Error); }
}
