#include "rbl/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>

#include "rbl/geometry.hpp"
#include "rbl/ingest.hpp"
#include "rbl/maskproc.hpp"
#include "rbl/png_io.hpp"
#include "rbl/report.hpp"

namespace rbl {

double PhantomRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double PhantomRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int PhantomRng::integer(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(next() % span);
}

double drop_for_crest_mm(double cej_bone_mm, double root_mm) {
  if (!(root_mm > 0.0) || cej_bone_mm < 0.0 || cej_bone_mm >= root_mm) {
    throw Error(ErrorKind::Precondition, "crest depth must lie in [0, root length)");
  }
  return cej_bone_mm / root_mm;
}

namespace {

// Tooth geometry resolved into pixels in its local (u, v) frame.
struct Shape {
  Point2 c, d, n;
  double mm_per_px_u = 0.0;
  double hw = 0.0;        // cervical half-width
  double crown_h = 0.0;
  double len_left = 0.0;  // root length on each side (equal for one root)
  double len_right = 0.0;
  int roots = 1;
  double tip_hw = 0.0;
  double apex_v = 0.0;    // lateral offset of two-root apices
  double trunk = 0.0;     // end of the undivided root trunk
  double furcation = 0.0;
  double crest_left = 0.0, crest_right = 0.0;
  double drop_left = 0.0, drop_right = 0.0;

  double tip_length() const { return tip_hw; }
  Point2 at(double u, double v) const { return c + d * u + n * v; }
  double u_of(const Point2& p) const { return (p - c).dot(d); }
  double v_of(const Point2& p) const { return (p - c).dot(n); }

  std::vector<Point2> polygon() const {
    std::vector<std::pair<double, double>> uv;
    uv.emplace_back(-crown_h, -1.1 * hw);
    uv.emplace_back(-crown_h, 1.1 * hw);
    uv.emplace_back(0.0, hw);
    // Roots end in a right-angled point so every apex is a single constructed vertex.
    const double tl = tip_length();
    if (roots == 1) {
      uv.emplace_back(len_right - tl, tip_hw);
      uv.emplace_back(len_right, 0.0);
      uv.emplace_back(len_left - tl, -tip_hw);
    } else {
      uv.emplace_back(trunk, hw);
      uv.emplace_back(len_right - tl, apex_v + tip_hw);
      uv.emplace_back(len_right, apex_v);
      uv.emplace_back(len_right - tl, apex_v - tip_hw);
      uv.emplace_back(furcation, 0.0);
      uv.emplace_back(len_left - tl, -apex_v + tip_hw);
      uv.emplace_back(len_left, -apex_v);
      uv.emplace_back(len_left - tl, -apex_v - tip_hw);
      uv.emplace_back(trunk, -hw);
    }
    uv.emplace_back(0.0, -hw);
    std::vector<Point2> out;
    for (auto [u, v] : uv) out.push_back(at(u, v));
    return out;
  }

  // Half-width of the outer root surface at depth u on one side.
  double surface_hw(double u, bool left) const {
    const double len = left ? len_left : len_right;
    const double taper_end = len - tip_length();
    const double point = tip_hw * (len - u) / tip_length();
    if (roots == 1) return u <= taper_end ? hw + (tip_hw - hw) * u / taper_end : point;
    if (u <= trunk) return hw;
    if (u <= taper_end) return hw + (apex_v + tip_hw - hw) * (u - trunk) / (taper_end - trunk);
    return apex_v + point;
  }

  double crest_at(const Point2& p) const {
    const double v = v_of(p);
    if (roots == 2 && std::abs(v) < apex_v && u_of(p) > furcation) return std::max(crest_left, crest_right);
    return v < 0.0 ? crest_left : crest_right;
  }
};

Point2 axis_direction(double angle_deg, Arch arch) {
  const double t = angle_deg * std::numbers::pi / 180.0;
  return arch == Arch::Maxilla ? Point2{std::sin(t), -std::cos(t)} : Point2{std::sin(t), std::cos(t)};
}

Point2 normal_of(const Point2& d) {
  Point2 n{-d.y, d.x};
  if (n.x < 0.0 || (n.x == 0.0 && n.y < 0.0)) n = n * -1.0;
  return n;
}

Shape resolve(const ToothSpec& t, Arch arch, const PixelSpacing& spacing, Point2 offset) {
  if (!(t.angle_deg > -45.0 && t.angle_deg < 45.0)) throw Error(ErrorKind::Precondition, "tooth angle outside (-45, 45)");
  if (!(t.root_length_mm > 0.0) || !(t.crown_width_mm > 0.0) || !(t.crown_height_mm > 0.0)) {
    throw Error(ErrorKind::Precondition, "tooth dimensions must be positive");
  }
  if (t.root_count != 1 && t.root_count != 2) throw Error(ErrorKind::Precondition, "root count must be 1 or 2");
  for (double drop : {t.drop_left, t.drop_right}) {
    if (!(drop >= 0.0 && drop < 1.0)) throw Error(ErrorKind::Precondition, "bone drop outside [0, 1)");
  }
  Shape s;
  s.c = t.cej_center + offset;
  s.d = axis_direction(t.angle_deg, arch);
  s.n = normal_of(s.d);
  s.mm_per_px_u = px_vector_to_mm(s.d.x, s.d.y, spacing);
  const double mm_per_px_v = px_vector_to_mm(s.n.x, s.n.y, spacing);
  s.hw = 0.5 * t.crown_width_mm / mm_per_px_v;
  s.crown_h = t.crown_height_mm / s.mm_per_px_u;
  s.roots = t.root_count;
  if (t.root_count == 1) {
    s.len_left = s.len_right = t.root_length_mm / s.mm_per_px_u;
    s.tip_hw = std::max(1.5, 0.3 * s.hw);
  } else {
    if (t.apex_offset_left_mm < 0.0 || t.apex_offset_right_mm < 0.0) {
      throw Error(ErrorKind::Precondition, "apex offsets must be >= 0");
    }
    s.len_left = (t.root_length_mm + t.apex_offset_left_mm) / s.mm_per_px_u;
    s.len_right = (t.root_length_mm + t.apex_offset_right_mm) / s.mm_per_px_u;
    s.tip_hw = std::max(1.5, 0.2 * s.hw);
    s.apex_v = 0.55 * s.hw;
    const double shortest = std::min(s.len_left, s.len_right);
    s.trunk = 0.25 * shortest;
    s.furcation = s.trunk + 0.2 * (shortest - s.trunk);
  }
  s.drop_left = t.drop_left;
  s.drop_right = t.drop_right;
  s.crest_left = t.drop_left * s.len_left;
  s.crest_right = t.drop_right * s.len_right;
  return s;
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.dot(ab);
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }

bool segments_cross(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

double polygon_distance(const std::vector<Point2>& p, const std::vector<Point2>& q) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point2& a = p[i];
    const Point2& b = p[(i + 1) % p.size()];
    for (std::size_t j = 0; j < q.size(); ++j) {
      const Point2& c = q[j];
      const Point2& d = q[(j + 1) % q.size()];
      if (segments_cross(a, b, c, d)) return 0.0;
      best = std::min({best, point_segment_distance(a, c, d), point_segment_distance(c, a, b)});
    }
  }
  return best;
}

}  // namespace

PhantomImage generate_image(const PhantomImageSpec& spec, std::uint64_t seed) {
  if (spec.width < 1 || spec.height < 1) throw Error(ErrorKind::Precondition, "phantom dimensions must be positive");
  if (spec.arch == Arch::Unknown) throw Error(ErrorKind::Precondition, "phantom arch must be known");
  if (spec.teeth.size() > 254) throw Error(ErrorKind::Precondition, "too many teeth for one label mask");
  PhantomRng rng(seed);
  const Point2 offset{rng.uniform() * spec.jitter_px, rng.uniform() * spec.jitter_px};
  const int W = spec.width, H = spec.height;

  std::vector<Shape> shapes;
  for (const auto& t : spec.teeth) {
    if (t.tooth.is_upper() != (spec.arch == Arch::Maxilla)) {
      throw Error(ErrorKind::Precondition, "tooth " + std::to_string(t.tooth.fdi_code()) + " is not in the " +
                                               to_string(spec.arch));
    }
    shapes.push_back(resolve(t, spec.arch, spec.spacing, offset));
  }

  ImageRecord rec;
  rec.image_id = spec.image_id;
  rec.spacing = spec.spacing;
  rec.arch = spec.arch;
  rec.bone_mask = BinaryMask(W, H);
  rec.cej_mask = BinaryMask(W, H);
  rec.tooth_mask = ToothLabelMask(W, H);

  std::vector<BinaryMask> tooth_masks;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const Shape& s = shapes[i];
    const auto poly = s.polygon();
    if (!spec.allow_truncation) {
      for (const auto& p : poly) {
        if (p.x < 0.0 || p.y < 0.0 || p.x > W || p.y > H) {
          throw Error(ErrorKind::Precondition, "tooth " + std::to_string(spec.teeth[i].tooth.fdi_code()) +
                                                   " extends past the image");
        }
      }
    }
    tooth_masks.push_back(rasterize_polygon(poly, W, H));
    const std::vector<Point2> cej_line{s.at(0.0, -s.hw - 2.0), s.at(0.0, s.hw + 2.0)};
    rec.cej_mask = mask_or(rec.cej_mask, rasterize_polyline(cej_line, W, H));
    rec.tooth_table.push_back({static_cast<int>(i + 1), spec.teeth[i].tooth, false});
  }
  for (std::size_t i = 0; i < tooth_masks.size(); ++i) {
    const BinaryMask grown = dilate(tooth_masks[i], 2);
    for (std::size_t j = i + 1; j < tooth_masks.size(); ++j) {
      auto a = grown.bits();
      auto b = tooth_masks[j].bits();
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] && b[k]) {
          throw Error(ErrorKind::Validation, "phantom teeth " + std::to_string(spec.teeth[i].tooth.fdi_code()) +
                                                 " and " + std::to_string(spec.teeth[j].tooth.fdi_code()) +
                                                 " overlap");
        }
      }
    }
    auto src = tooth_masks[i].bits();
    auto dst = rec.tooth_mask.labels();
    for (std::size_t k = 0; k < src.size(); ++k) {
      if (src[k]) dst[k] = static_cast<std::uint8_t>(i + 1);
    }
  }

  // Bone: every non-tooth pixel apical to the crest of the tooth whose surface is nearest.
  if (!shapes.empty()) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (rec.tooth_mask.get(x, y)) continue;
        const Point2 p = pixel_center({x, y});
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < shapes.size(); ++i) {
          const double dist = std::abs(shapes[i].v_of(p)) - shapes[i].hw;
          if (dist < best_d) {
            best_d = dist;
            best = i;
          }
        }
        if (shapes[best].u_of(p) >= shapes[best].crest_at(p)) rec.bone_mask.set(x, y);
      }
    }
  }

  PhantomImage out;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const Shape& s = shapes[i];
    ToothTruth t;
    t.tooth = spec.teeth[i].tooth;
    t.label = static_cast<int>(i + 1);
    t.image_id = spec.image_id;
    for (int k = 0; k < 2; ++k) {
      const bool left = k == 0;
      const double sign = left ? -1.0 : 1.0;
      SiteTruth& st = t.sites[k];
      st.image_side = left ? ImageSide::Left : ImageSide::Right;
      st.side = map_site_side(st.image_side, t.tooth, spec.arch, Laterality::Unknown);
      const double len = left ? s.len_left : s.len_right;
      const double crest = left ? s.crest_left : s.crest_right;
      st.cej = s.at(0.0, sign * s.hw);
      st.bone = s.at(crest, sign * s.surface_hw(crest, left));
      st.apex = s.at(len, s.roots == 2 ? sign * s.apex_v : 0.0);
      st.len1_px = crest;
      st.len2_px = len;
      st.len1_mm = crest * s.mm_per_px_u;
      st.len2_mm = len * s.mm_per_px_u;
      st.rbl_percent = 100.0 * (left ? s.drop_left : s.drop_right);
      st.stage = stage_site(st.rbl_percent, st.len1_mm, spec.staging).stage;
    }
    t.rbl_percent = std::max(t.sites[0].rbl_percent, t.sites[1].rbl_percent);
    t.stage = std::max(t.sites[0].stage, t.sites[1].stage);
    t.boundary_flag = boundary_flag(t.rbl_percent, spec.staging);
    t.max_len1_mm = std::max(t.sites[0].len1_mm, t.sites[1].len1_mm);
    out.truth.push_back(t);
  }
  std::sort(out.truth.begin(), out.truth.end(),
            [](const ToothTruth& a, const ToothTruth& b) { return a.tooth < b.tooth; });
  out.record = std::move(rec);
  return out;
}

ToothAssessment truth_as_assessment(const ToothTruth& t) {
  ToothAssessment a;
  a.tooth = t.tooth;
  a.label = t.label;
  a.image_id = t.image_id;
  for (const auto& st : t.sites) {
    SiteMeasurement s;
    s.image_side = st.image_side;
    s.side = st.side;
    s.cej_point = st.cej;
    s.bone_point = st.bone;
    s.apex_point = st.apex;
    s.len1_px = st.len1_px;
    s.len2_px = st.len2_px;
    s.len1_mm = st.len1_mm;
    s.len2_mm = st.len2_mm;
    s.rbl_percent = st.rbl_percent;
    s.stage = st.stage;
    a.sites.push_back(s);
  }
  a.rbl_percent = t.rbl_percent;
  a.stage = t.stage;
  a.boundary_flag = t.boundary_flag;
  a.max_len1_mm = t.max_len1_mm;
  return a;
}

// ---- layout and random images ------------------------------------------------

void layout_teeth(PhantomImageSpec& spec, double gap_px, double margin_px) {
  if (spec.teeth.empty()) throw Error(ErrorKind::Precondition, "layout needs at least one tooth");
  std::sort(spec.teeth.begin(), spec.teeth.end(), [](const ToothSpec& a, const ToothSpec& b) {
    return a.tooth.arch_index() < b.tooth.arch_index();
  });
  double mean_angle = 0.0;
  for (const auto& t : spec.teeth) mean_angle += t.angle_deg;
  mean_angle /= static_cast<double>(spec.teeth.size());
  const Point2 lateral = normal_of(axis_direction(mean_angle, spec.arch));
  constexpr double kMinSeparation = 10.0;

  std::vector<double> gaps(spec.teeth.size(), gap_px);
  std::vector<std::vector<Point2>> polys;
  for (int attempt = 0; attempt < 200; ++attempt) {
    double s = 0.0;
    polys.clear();
    for (std::size_t i = 0; i < spec.teeth.size(); ++i) {
      auto& t = spec.teeth[i];
      if (i > 0) {
        const auto& prev = spec.teeth[i - 1];
        const double mm_v = px_vector_to_mm(lateral.x, lateral.y, spec.spacing);
        s += 0.55 * (prev.crown_width_mm + t.crown_width_mm) / mm_v + gaps[i];
      }
      t.cej_center = lateral * s;
      polys.push_back(resolve(t, spec.arch, spec.spacing, {0.0, 0.0}).polygon());
    }
    bool ok = true;
    for (std::size_t i = 1; i < polys.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (polygon_distance(polys[i], polys[j]) < kMinSeparation) {
          gaps[i] += 4.0;
          ok = false;
        }
      }
    }
    if (ok) break;
    if (attempt == 199) throw Error(ErrorKind::Precondition, "could not separate phantom teeth");
  }
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  for (const auto& poly : polys) {
    for (const auto& p : poly) {
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
  }
  const Point2 shift{margin_px - x0, margin_px - y0};
  for (auto& t : spec.teeth) t.cej_center = t.cej_center + shift;
  spec.width = static_cast<int>(std::ceil(x1 - x0 + 2.0 * margin_px + spec.jitter_px));
  spec.height = static_cast<int>(std::ceil(y1 - y0 + 2.0 * margin_px + spec.jitter_px));
}

namespace {

struct Dimensions {
  double width, crown, root;
};

Dimensions typical_dimensions(int position) {
  switch (position) {
    case 1: return {8.5, 10.0, 13.0};
    case 2: return {6.5, 9.0, 13.0};
    case 3: return {7.5, 10.0, 16.0};
    case 4: return {7.0, 8.5, 14.0};
    case 5: return {7.0, 8.0, 14.0};
    case 6: return {10.5, 7.5, 13.0};
    case 7: return {10.0, 7.0, 13.0};
    default: return {9.0, 6.5, 11.0};
  }
}

ToothNumber tooth_at_arch_index(bool upper, int index) {
  // index 0..15 from the patient's right third molar
  const int quadrant = upper ? (index < 8 ? 1 : 2) : (index < 8 ? 4 : 3);
  const int position = index < 8 ? 8 - index : index - 7;
  return ToothNumber::fdi(quadrant * 10 + position);
}

ToothNumber in_system(const ToothNumber& t, NumberingSystem system) {
  return system == NumberingSystem::FDI ? t : ToothNumber::universal(fdi_to_universal(t.fdi_code()));
}

}  // namespace

PhantomImage random_phantom(std::uint64_t seed, const RandomPhantomOptions& o) {
  PhantomRng rng(seed);
  PhantomImageSpec spec;
  spec.image_id = "random-" + std::to_string(seed);
  spec.arch = rng.chance(0.5) ? Arch::Maxilla : Arch::Mandible;
  const double s = rng.uniform(o.min_spacing_mm, o.max_spacing_mm);
  spec.spacing = o.anisotropic ? PixelSpacing::create(s * rng.uniform(0.95, 1.05), s) : PixelSpacing::isotropic(s);
  const NumberingSystem system = rng.chance(0.5) ? NumberingSystem::FDI : NumberingSystem::Universal;

  const int n = rng.integer(o.min_teeth, o.max_teeth);
  const int first = rng.integer(0, 16 - n);
  const double base_angle = rng.uniform(-(o.max_angle_deg - 5.0), o.max_angle_deg - 5.0);
  for (int k = 0; k < n; ++k) {
    ToothSpec t;
    t.tooth = in_system(tooth_at_arch_index(spec.arch == Arch::Maxilla, first + k), system);
    const Dimensions dim = typical_dimensions(t.tooth.position());
    t.angle_deg = std::clamp(base_angle + rng.uniform(-5.0, 5.0), -o.max_angle_deg, o.max_angle_deg);
    t.crown_width_mm = dim.width * rng.uniform(0.9, 1.1);
    t.crown_height_mm = dim.crown * rng.uniform(0.9, 1.1);
    t.root_length_mm = dim.root * rng.uniform(0.9, 1.2);
    t.root_count = t.tooth.position() >= 6 ? 2 : 1;
    if (t.root_count == 2) {
      t.apex_offset_left_mm = rng.chance(0.5) ? rng.uniform(0.0, 1.5) : 0.0;
      t.apex_offset_right_mm = rng.chance(0.5) ? rng.uniform(0.0, 1.5) : 0.0;
    }
    t.drop_left = rng.uniform(0.0, o.max_drop);
    t.drop_right = rng.uniform(0.0, o.max_drop);
    spec.teeth.push_back(t);
  }
  layout_teeth(spec);
  return generate_image(spec, rng.next());
}

ImageRecord degrade(const ImageRecord& record, double density, std::uint64_t seed) {
  if (!(density >= 0.0 && density <= 0.05)) throw Error(ErrorKind::Precondition, "noise density outside [0, 0.05]");
  ImageRecord out = record;
  if (density == 0.0) return out;
  PhantomRng rng(seed);
  const int W = record.width(), H = record.height();
  std::vector<std::uint8_t> labels;
  for (const auto& e : record.tooth_table) labels.push_back(static_cast<std::uint8_t>(e.label));
  const auto speckles = static_cast<int>(std::lround(density * W * H / 50.0));

  auto noise_binary = [&](BinaryMask& m) {
    for (auto& b : m.bits()) {
      if (rng.chance(density)) b = b ? 0 : 1;
    }
    for (int k = 0; k < speckles; ++k) {
      const int x = rng.integer(0, W - 1), y = rng.integer(0, H - 1);
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          if (m.in_bounds(x + dx, y + dy)) m.set(x + dx, y + dy);
        }
      }
    }
  };
  noise_binary(out.bone_mask);
  noise_binary(out.cej_mask);
  if (!labels.empty()) {
    for (auto& v : out.tooth_mask.labels()) {
      if (!rng.chance(density)) continue;
      v = v ? 0 : labels[rng.integer(0, static_cast<int>(labels.size()) - 1)];
    }
    for (int k = 0; k < speckles; ++k) {
      const int x = rng.integer(0, W - 1), y = rng.integer(0, H - 1);
      const std::uint8_t l = labels[rng.integer(0, static_cast<int>(labels.size()) - 1)];
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          if (out.tooth_mask.in_bounds(x + dx, y + dy)) out.tooth_mask.set(x + dx, y + dy, l);
        }
      }
    }
  }
  return out;
}

// ---- cases -------------------------------------------------------------------

CaseDiagnosis diagnose_truth(const std::vector<ToothTruth>& merged, std::optional<int> age,
                             const DiagnosisPolicy& policy) {
  std::vector<ToothAssessment> as;
  for (const auto& t : merged) as.push_back(truth_as_assessment(t));
  return diagnose(merge_across_images(as, {}, age), policy);
}

PhantomCase generate_case(const std::string& case_id, int n_teeth, const std::array<double, 4>& mix,
                          std::optional<int> age, std::uint64_t seed, const CaseOptions& options) {
  if (n_teeth < 1 || n_teeth > 32) throw Error(ErrorKind::Validation, "tooth count must lie in 1..32");
  double sum = 0.0;
  for (double m : mix) {
    if (!(m >= 0.0)) throw Error(ErrorKind::Validation, "stage mix proportions must be >= 0");
    sum += m;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::Validation, "stage mix must sum to 1");
  if (options.images_per_arch < 0 || options.images_per_arch > 10) {
    throw Error(ErrorKind::Validation, "images per arch must lie in 0..10");
  }

  // Stage counts by largest remainder.
  std::array<int, 4> counts{};
  std::array<double, 4> frac{};
  int assigned = 0;
  for (int k = 0; k < 4; ++k) {
    const double raw = mix[k] * n_teeth;
    counts[k] = static_cast<int>(std::floor(raw + 1e-9));
    frac[k] = raw - counts[k];
    assigned += counts[k];
  }
  while (assigned < n_teeth) {
    int best = 0;
    for (int k = 1; k < 4; ++k) {
      if (frac[k] > frac[best]) best = k;
    }
    ++counts[best];
    frac[best] = -1.0;
    ++assigned;
  }
  const int affected = n_teeth - counts[0];
  if (affected == 1) throw Error(ErrorKind::Validation, "stage mix yields a single affected tooth");

  PhantomRng rng(seed);
  const NumberingSystem system =
      options.numbering ? *options.numbering : (rng.chance(0.5) ? NumberingSystem::FDI : NumberingSystem::Universal);

  // Tooth selection: the 28 non-third-molars first, then third molars.
  std::vector<ToothNumber> pool, extra;
  for (bool upper : {true, false}) {
    for (int i = 0; i < 16; ++i) {
      const ToothNumber t = tooth_at_arch_index(upper, i);
      (t.position() == 8 ? extra : pool).push_back(t);
    }
  }
  auto shuffle = [&](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.integer(0, static_cast<int>(i) - 1)]);
  };
  std::vector<ToothNumber> chosen;
  if (n_teeth <= 28) {
    shuffle(pool);
    chosen.assign(pool.begin(), pool.begin() + n_teeth);
  } else {
    shuffle(extra);
    chosen = pool;
    chosen.insert(chosen.end(), extra.begin(), extra.begin() + (n_teeth - 28));
  }
  if (affected == 2 && n_teeth == 2 && teeth_adjacent(chosen[0], chosen[1])) {
    throw Error(ErrorKind::Validation, "stage mix needs two non-adjacent affected teeth but only an adjacent pair exists");
  }
  std::sort(chosen.begin(), chosen.end());

  // Stage per tooth via a seeded shuffle of the stage list.
  std::vector<RblStage> stages;
  for (int k = 0; k < 4; ++k) stages.insert(stages.end(), counts[k], static_cast<RblStage>(k));
  shuffle(stages);

  struct Plan {
    ToothSpec spec;        // governing geometry
    bool governing_left = true;
  };
  std::map<int, Plan> plans;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const ToothNumber t = chosen[i];
    const Dimensions dim = typical_dimensions(t.position());
    Plan p;
    ToothSpec& s = p.spec;
    s.tooth = in_system(t, system);
    s.crown_width_mm = dim.width * rng.uniform(0.95, 1.05);
    s.crown_height_mm = dim.crown * rng.uniform(0.95, 1.05);
    s.root_count = t.position() >= 6 ? 2 : 1;
    const RblStage stage = stages[i];
    s.root_length_mm = stage == RblStage::StageI ? rng.uniform(16.0, 18.0) : rng.uniform(13.0, 17.0);
    if (s.root_count == 2) {
      (rng.chance(0.5) ? s.apex_offset_left_mm : s.apex_offset_right_mm) = rng.uniform(0.0, 1.2);
    }
    p.governing_left = rng.chance(0.5);
    const double len_gov =
        s.root_length_mm + (p.governing_left ? s.apex_offset_left_mm : s.apex_offset_right_mm);
    const double len_other =
        s.root_length_mm + (p.governing_left ? s.apex_offset_right_mm : s.apex_offset_left_mm);
    double gov = 0.0, other = 0.0;
    switch (stage) {
      case RblStage::NoBoneLoss: {
        const double mm = rng.uniform(0.3, 1.1);
        gov = mm / len_gov;
        other = rng.uniform(0.2, mm) / len_other;
        break;
      }
      case RblStage::StageI:
        gov = rng.uniform(std::max(100.0 * 1.95 / len_gov, 10.0), 12.5) / 100.0;
        other = gov * rng.uniform(0.4, 0.85);
        break;
      case RblStage::StageII:
        gov = rng.uniform(18.0, 30.0) / 100.0;
        other = gov * rng.uniform(0.4, 0.85);
        break;
      case RblStage::StageIII:
        gov = rng.uniform(36.0, 60.0) / 100.0;
        other = gov * rng.uniform(0.4, 0.85);
        break;
    }
    (p.governing_left ? s.drop_left : s.drop_right) = gov;
    (p.governing_left ? s.drop_right : s.drop_left) = other;
    plans.emplace(t.fdi_code(), p);
  }

  // Full-mouth series: overlapping windows of up to three neighbouring teeth per arch.
  std::vector<std::vector<ToothNumber>> arch_teeth(2);
  for (const auto& t : chosen) arch_teeth[t.is_upper() ? 0 : 1].push_back(t);
  for (auto& v : arch_teeth) {
    std::sort(v.begin(), v.end(), [](const ToothNumber& a, const ToothNumber& b) { return a.arch_index() < b.arch_index(); });
  }
  const int nonempty = static_cast<int>(!arch_teeth[0].empty()) + static_cast<int>(!arch_teeth[1].empty());
  std::vector<std::pair<int, std::vector<ToothNumber>>> windows;  // (arch, teeth)
  for (int a = 0; a < 2; ++a) {
    const auto& teeth = arch_teeth[a];
    if (teeth.empty()) continue;
    const int m = static_cast<int>(teeth.size());
    const int w = std::min(3, m);
    int k = options.images_per_arch;
    if (k == 0) {
      k = std::clamp((std::max(m - 3, 0) + 1) / 2 + 1, 6, 10);
      if (nonempty == 1) k = std::max(k, 12);
    }
    for (int i = 0; i < k; ++i) {
      const int start = k == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(i) * (m - w) / (k - 1)));
      windows.emplace_back(a, std::vector<ToothNumber>(teeth.begin() + start, teeth.begin() + start + w));
    }
  }

  // One governing appearance per tooth; the others show less loss.
  std::map<int, std::vector<std::size_t>> appearances;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (const auto& t : windows[i].second) appearances[t.fdi_code()].push_back(i);
  }
  std::map<int, std::size_t> governing;
  for (const auto& [code, list] : appearances) governing[code] = list[rng.integer(0, static_cast<int>(list.size()) - 1)];

  const double spacing_mm = rng.uniform(0.055, 0.075);
  PhantomCase out;
  out.case_id = case_id;
  out.patient_age = age;
  out.diagnosis = options.diagnosis;
  std::map<int, int> arch_counter;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& [arch, teeth] = windows[i];
    PhantomImageSpec spec;
    char id[32];
    std::snprintf(id, sizeof id, "%s%02d", arch == 0 ? "U" : "L", ++arch_counter[arch]);
    spec.image_id = id;
    spec.arch = arch == 0 ? Arch::Maxilla : Arch::Mandible;
    spec.spacing = PixelSpacing::isotropic(spacing_mm);
    spec.staging = options.staging;
    const double base = rng.uniform(-15.0, 15.0);
    for (const auto& t : teeth) {
      ToothSpec s = plans.at(t.fdi_code()).spec;
      s.angle_deg = base + rng.uniform(-5.0, 5.0);
      if (governing.at(t.fdi_code()) != i) {
        // Keep the weaker appearance clear of the stage thresholds, so that the per-image
        // truth stage is not decided by a fraction of a pixel.
        auto clear = [&](double drop, double len_mm) {
          const double rbl = 100.0 * drop, mm = drop * len_mm;
          return std::abs(rbl - options.staging.stage1_max_percent) > 1.5 &&
                 std::abs(rbl - options.staging.stage2_max_percent) > 1.5 &&
                 std::abs(mm - options.staging.no_loss_max_mm) > 0.25;
        };
        const double len_l = s.root_length_mm + s.apex_offset_left_mm;
        const double len_r = s.root_length_mm + s.apex_offset_right_mm;
        double f = rng.uniform(0.7, 0.9);
        for (int tries = 0; tries < 64 && !(clear(s.drop_left * f, len_l) && clear(s.drop_right * f, len_r)); ++tries) {
          f = rng.uniform(0.5, 0.95);
        }
        s.drop_left *= f;
        s.drop_right *= f;
      }
      spec.teeth.push_back(s);
    }
    layout_teeth(spec);
    out.images.push_back(generate_image(spec, rng.next()));
  }
  if (options.shuffle_images) shuffle(out.images);

  std::vector<ToothAssessment> all;
  for (const auto& img : out.images) {
    for (const auto& t : img.truth) all.push_back(truth_as_assessment(t));
  }
  const CaseAssessment merged = merge_across_images(all, case_id, age);
  for (const auto& m : merged.teeth) {
    for (const auto& img : out.images) {
      if (img.record.image_id != m.assessment.image_id) continue;
      for (const auto& t : img.truth) {
        if (t.tooth == m.assessment.tooth) out.merged.push_back(t);
      }
    }
  }
  out.expected = diagnose(merged, options.diagnosis);
  return out;
}

Json phantom_truth_json(const PhantomCase& c) {
  std::vector<const PhantomImage*> images;
  for (const auto& img : c.images) images.push_back(&img);
  std::sort(images.begin(), images.end(),
            [](const PhantomImage* a, const PhantomImage* b) { return a->record.image_id < b->record.image_id; });
  Json truth_images = Json::array();
  for (const auto* img : images) {
    const ImageRecord& r = img->record;
    Json ti;
    ti["image_id"] = r.image_id;
    ti["width"] = r.width();
    ti["height"] = r.height();
    ti["spacing"] = spacing_to_json(r.spacing);
    ti["arch"] = to_string(r.arch);
    Json teeth = Json::array();
    for (const auto& t : img->truth) teeth.push_back(truth_tooth_to_json(t));
    ti["teeth"] = teeth;
    truth_images.push_back(ti);
  }
  Json truth;
  truth["schema_version"] = kTruthSchema;
  truth["case_id"] = c.case_id;
  truth["patient_age"] = c.patient_age ? Json(*c.patient_age) : Json(nullptr);
  truth["diagnosis_policy"] = diagnosis_policy_to_json(c.diagnosis);
  truth["images"] = truth_images;
  Json merged = Json::array();
  for (const auto& t : c.merged) merged.push_back(truth_tooth_to_json(t));
  truth["teeth"] = merged;
  truth["expected_diagnosis"] = diagnosis_to_json(c.expected);
  return truth;
}

void write_phantom_case(const PhantomCase& c, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + (dir / "images").string(), dir.string());

  std::vector<const PhantomImage*> images;
  for (const auto& img : c.images) images.push_back(&img);
  std::sort(images.begin(), images.end(),
            [](const PhantomImage* a, const PhantomImage* b) { return a->record.image_id < b->record.image_id; });

  Json manifest;
  manifest["case_id"] = c.case_id;
  manifest["patient_age"] = c.patient_age ? Json(*c.patient_age) : Json(nullptr);
  Json mimages = Json::array();
  for (const auto* img : images) {
    const ImageRecord& r = img->record;
    const std::string stem = "images/" + r.image_id;
    png::write_binary_mask(dir / (stem + "_bone.png"), r.bone_mask);
    png::write_label_mask(dir / (stem + "_tooth.png"), r.tooth_mask);
    png::write_binary_mask(dir / (stem + "_cej.png"), r.cej_mask);
    Json e;
    e["image_id"] = r.image_id;
    e["bone_mask"] = stem + "_bone.png";
    e["tooth_mask"] = stem + "_tooth.png";
    e["cej_mask"] = stem + "_cej.png";
    e["spacing"] = spacing_to_json(r.spacing);
    e["arch"] = to_string(r.arch);
    e["laterality"] = to_string(r.laterality);
    const NumberingSystem system = r.tooth_table.empty() ? NumberingSystem::FDI : r.tooth_table.front().number.system();
    e["numbering"] = to_string(system);
    Json table = Json::array();
    for (const auto& t : r.tooth_table) {
      Json te;
      te["label"] = t.label;
      te["tooth"] = t.number.entered();
      if (t.number.system() != system) te["numbering"] = to_string(t.number.system());
      table.push_back(te);
    }
    e["tooth_table"] = table;
    mimages.push_back(e);
  }
  manifest["images"] = mimages;

  write_text_file(dir / "manifest.json", dump_json(manifest));
  write_text_file(dir / "truth.json", dump_json(phantom_truth_json(c)));
}

}  // namespace rbl
