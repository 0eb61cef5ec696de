#include "rbl/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rbl/png_io.hpp"

namespace rbl {

using nlohmann::json;

namespace {

constexpr double kSnap = 1e-9;

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < kSnap ? r : v;
}

bool is_pixel_center_coord(double v) {
  const double shifted = v - 0.5;
  return std::abs(shifted - std::round(shifted)) < kSnap;
}

}  // namespace

double polygon_area(std::span<const Point2> polygon) {
  double twice = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

BinaryMask rasterize_polygon(std::span<const Point2> polygon, int width, int height) {
  BinaryMask out(width, height);
  const std::size_t n = polygon.size();
  if (n < 3 || std::abs(polygon_area(polygon)) < 1e-12) return out;

  double ymin = polygon[0].y, ymax = polygon[0].y;
  for (const auto& p : polygon) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int row_lo = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
  const int row_hi = std::min(height - 1, static_cast<int>(std::ceil(ymax - 0.5)));

  auto fill_span = [&](int row, double xl, double xr) {
    // centres xc = i + 0.5 with xl <= xc <= xr
    const int i0 = std::max(0, static_cast<int>(std::ceil(snap(xl - 0.5))));
    const int i1 = std::min(width - 1, static_cast<int>(std::floor(snap(xr - 0.5))));
    for (int i = i0; i <= i1; ++i) out.set(i, row);
  };

  std::vector<double> xs;
  for (int row = row_lo; row <= row_hi; ++row) {
    const double yc = row + 0.5;
    xs.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const Point2& a = polygon[k];
      const Point2& b = polygon[(k + 1) % n];
      if (a.y == b.y) {
        if (a.y == yc) fill_span(row, std::min(a.x, b.x), std::max(a.x, b.x));
        continue;
      }
      const double lo = std::min(a.y, b.y);
      const double hi = std::max(a.y, b.y);
      if (yc < lo || yc > hi) continue;
      const double x = a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y);
      if (is_pixel_center_coord(x)) fill_span(row, x, x);  // centre on the edge
      if (yc < hi) xs.push_back(x);                          // half-open crossing rule
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) fill_span(row, xs[k], xs[k + 1]);
  }
  return out;
}

namespace {

struct Bound {
  double value;
  bool open;
};

void rasterize_segment(const Point2& p0, const Point2& p1, BinaryMask& out) {
  const double dx = p1.x - p0.x;
  const double dy = p1.y - p0.y;
  auto mark = [&](int col, int row) {
    if (out.in_bounds(col, row)) out.set(col, row);
  };
  auto mark_rows = [&](int col, Bound ylo, Bound yhi) {
    const double lo = snap(ylo.value);
    const double hi = snap(yhi.value);
    const int r0 = static_cast<int>(std::floor(lo));
    int r1 = static_cast<int>(std::floor(hi));
    if (yhi.open && hi == std::floor(hi) && r1 > r0) --r1;
    for (int r = r0; r <= r1; ++r) mark(col, r);
  };

  if (dx == 0.0) {
    const int col = static_cast<int>(std::floor(snap(p0.x)));
    mark_rows(col, {std::min(p0.y, p1.y), false}, {std::max(p0.y, p1.y), false});
    return;
  }
  const double xmin = std::min(p0.x, p1.x);
  const double xmax = std::max(p0.x, p1.x);
  const int c0 = static_cast<int>(std::floor(snap(xmin)));
  const int c1 = static_cast<int>(std::floor(snap(xmax)));
  for (int col = c0; col <= c1; ++col) {
    // t-range with x(t) in [col, col+1), clipped to [0, 1]
    const double ta = snap((col - p0.x) / dx);
    const double tb = snap((col + 1 - p0.x) / dx);
    Bound tlo, thi;
    if (dx > 0) {
      tlo = {ta, false};
      thi = {tb, true};
    } else {
      tlo = {tb, true};
      thi = {ta, false};
    }
    if (tlo.value < 0.0) tlo = {0.0, false};
    if (thi.value > 1.0) thi = {1.0, false};
    if (tlo.value > thi.value) continue;
    if (tlo.value == thi.value && (tlo.open || thi.open)) continue;
    Bound ya{p0.y + tlo.value * dy, tlo.open};
    Bound yb{p0.y + thi.value * dy, thi.open};
    if (tlo.value == 0.0) ya.value = p0.y;
    if (thi.value == 1.0) yb.value = p1.y;
    if (dy == 0.0) {
      mark_rows(col, {p0.y, false}, {p0.y, false});
    } else if (dy > 0) {
      mark_rows(col, ya, yb);
    } else {
      mark_rows(col, yb, ya);
    }
  }
}

}  // namespace

BinaryMask rasterize_polyline(std::span<const Point2> polyline, int width, int height) {
  if (polyline.size() < 2) {
    throw Error(ErrorKind::Precondition, "polyline needs at least two vertices");
  }
  BinaryMask out(width, height);
  for (std::size_t k = 0; k + 1 < polyline.size(); ++k) {
    rasterize_segment(polyline[k], polyline[k + 1], out);
  }
  return out;
}

// ---- JSON helpers ----------------------------------------------------------

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Schema, source + ": " + e.what(), source);
  }
}

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::Schema, path + ": " + what, path);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path + "." + key, "missing required field");
  return *it;
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) schema_error(path, "expected a string");
  return v.get<std::string>();
}

int get_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) schema_error(path, "expected an integer");
  return v.get<int>();
}

double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  return v.get<double>();
}

bool get_bool(const json& obj, const std::string& key, const std::string& path, bool fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) schema_error(path + "." + key, "expected a boolean");
  return it->get<bool>();
}

std::vector<Point2> get_points(const json& v, const std::string& path) {
  if (!v.is_array()) schema_error(path, "expected an array of [x, y] pairs");
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const json& p = v[i];
    const std::string ip = path + "[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != 2) schema_error(ip, "expected [x, y]");
    pts.push_back({get_number(p[0], ip + "[0]"), get_number(p[1], ip + "[1]")});
  }
  return pts;
}

RoiKind parse_polygon_kind(const std::string& text, const std::string& path) {
  if (text == "bone_area") return RoiKind::BoneArea;
  if (text == "tooth") return RoiKind::Tooth;
  if (text == "other") return RoiKind::Other;
  schema_error(path, "unknown polygon kind '" + text + "'");
}

void clamp_points(std::vector<Point2>& pts, int width, int height, const std::string& path,
                  std::vector<std::string>* warnings) {
  bool clamped = false;
  for (auto& p : pts) {
    const Point2 before = p;
    p.x = std::clamp(p.x, 0.0, static_cast<double>(width));
    p.y = std::clamp(p.y, 0.0, static_cast<double>(height));
    clamped = clamped || !(before == p);
  }
  if (clamped && warnings) warnings->push_back(path + ": vertices outside the image were clamped");
}

}  // namespace

AnnotationSet parse_annotation_set(const std::string& json_text, const std::string& source,
                                   std::vector<std::string>* warnings) {
  const json doc = parse_json(json_text, source);
  AnnotationSet set;
  set.image_id = get_string(require(doc, "image_id", source), source + ".image_id");
  set.width = get_int(require(doc, "width", source), source + ".width");
  set.height = get_int(require(doc, "height", source), source + ".height");
  if (set.width < 1 || set.height < 1) schema_error(source + ".width", "image must be at least 1x1");

  if (auto it = doc.find("polygons"); it != doc.end()) {
    if (!it->is_array()) schema_error(source + ".polygons", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& pj = (*it)[i];
      const std::string path = source + ".polygons[" + std::to_string(i) + "]";
      RoiPolygon poly;
      poly.kind = parse_polygon_kind(get_string(require(pj, "kind", path), path + ".kind"), path + ".kind");
      if (auto lj = pj.find("label"); lj != pj.end()) poly.label = get_int(*lj, path + ".label");
      if (auto nj = pj.find("name"); nj != pj.end()) poly.name = get_string(*nj, path + ".name");
      poly.points = get_points(require(pj, "points", path), path + ".points");
      if (poly.points.size() < 3) schema_error(path + ".points", "a polygon needs at least 3 vertices");
      if (poly.kind == RoiKind::Tooth && (!poly.label || *poly.label < 1 || *poly.label > 254)) {
        schema_error(path + ".label", "tooth polygons need a label in 1..254");
      }
      clamp_points(poly.points, set.width, set.height, path, warnings);
      set.polygons.push_back(std::move(poly));
    }
  }
  if (auto it = doc.find("polylines"); it != doc.end()) {
    if (!it->is_array()) schema_error(source + ".polylines", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& pj = (*it)[i];
      const std::string path = source + ".polylines[" + std::to_string(i) + "]";
      AnnotatedPolyline line;
      const std::string kind = get_string(require(pj, "kind", path), path + ".kind");
      if (kind != "cej") schema_error(path + ".kind", "polylines must be of kind 'cej'");
      line.crown_margin = get_bool(pj, "crown_margin", path, false);
      line.points = get_points(require(pj, "points", path), path + ".points");
      if (line.points.size() < 2) schema_error(path + ".points", "a polyline needs at least 2 vertices");
      clamp_points(line.points, set.width, set.height, path, warnings);
      set.polylines.push_back(std::move(line));
    }
  }
  return set;
}

AnnotationSet load_annotation_set(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  return parse_annotation_set(read_text(path), path.string(), warnings);
}

RasterizedAnnotations rasterize_annotations(const AnnotationSet& set) {
  RasterizedAnnotations out{BinaryMask(set.width, set.height), ToothLabelMask(set.width, set.height),
                            BinaryMask(set.width, set.height), std::nullopt, {}, {}};
  for (const auto& poly : set.polygons) {
    if (poly.kind == RoiKind::Other) {
      out.other_rois.push_back(poly);
      continue;
    }
    const BinaryMask m = rasterize_polygon(poly.points, set.width, set.height);
    if (!m.any()) {
      out.warnings.push_back(std::string("degenerate ") + to_string(poly.kind) + " polygon rasterized empty");
      continue;
    }
    for (int y = 0; y < set.height; ++y) {
      for (int x = 0; x < set.width; ++x) {
        if (!m.get(x, y)) continue;
        if (poly.kind == RoiKind::BoneArea) {
          out.bone_mask.set(x, y);
        } else {
          out.tooth_mask.set(x, y, static_cast<std::uint8_t>(*poly.label));
        }
      }
    }
  }
  for (const auto& line : set.polylines) {
    const BinaryMask m = rasterize_polyline(line.points, set.width, set.height);
    if (line.crown_margin && !out.crown_margin_mask) {
      out.crown_margin_mask = BinaryMask(set.width, set.height);
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m.bits()[i]) continue;
      out.cej_mask.bits()[i] = 1;
      if (line.crown_margin) out.crown_margin_mask->bits()[i] = 1;
    }
  }
  return out;
}

// ---- manifest --------------------------------------------------------------

namespace {

struct ImageEntry {
  std::string path;  // manifest field path for error messages
  std::string image_id;
  std::optional<std::filesystem::path> bone, tooth, cej, crown_margin, annotation;
  std::optional<PixelSpacing> spacing;
  Laterality laterality = Laterality::Unknown;
  Arch arch = Arch::Unknown;
  bool cej_is_crown_margin = false;
  std::vector<ToothEntry> tooth_table;
};

ImageEntry parse_image_entry(const json& ij, const std::string& path, const std::filesystem::path& base) {
  ImageEntry e;
  e.path = path;
  e.image_id = get_string(require(ij, "image_id", path), path + ".image_id");
  if (e.image_id.empty()) schema_error(path + ".image_id", "must be nonempty");
  auto file = [&](const char* key) -> std::optional<std::filesystem::path> {
    auto it = ij.find(key);
    if (it == ij.end()) return std::nullopt;
    std::filesystem::path p = get_string(*it, path + "." + key);
    return p.is_absolute() ? p : base / p;
  };
  e.bone = file("bone_mask");
  e.tooth = file("tooth_mask");
  e.cej = file("cej_mask");
  e.crown_margin = file("crown_margin_mask");
  e.annotation = file("annotation");
  const bool has_masks = e.bone || e.tooth || e.cej;
  if (e.annotation && has_masks) schema_error(path, "give either mask files or an annotation file, not both");
  if (!e.annotation && !(e.bone && e.tooth && e.cej)) {
    schema_error(path, "needs bone_mask, tooth_mask and cej_mask, or an annotation file");
  }
  if (auto it = ij.find("spacing"); it != ij.end() && !it->is_null()) {
    const std::string sp = path + ".spacing";
    const double row = get_number(require(*it, "row_mm_per_px", sp), sp + ".row_mm_per_px");
    const double col = get_number(require(*it, "col_mm_per_px", sp), sp + ".col_mm_per_px");
    try {
      e.spacing = PixelSpacing::create(row, col);
    } catch (const Error& err) {
      schema_error(sp, err.what());
    }
  }
  try {
    if (auto it = ij.find("laterality"); it != ij.end()) e.laterality = parse_laterality(get_string(*it, path + ".laterality"));
    if (auto it = ij.find("arch"); it != ij.end()) e.arch = parse_arch(get_string(*it, path + ".arch"));
  } catch (const Error& err) {
    schema_error(path, err.what());
  }
  e.cej_is_crown_margin = get_bool(ij, "cej_is_crown_margin", path, false);

  NumberingSystem default_system = NumberingSystem::FDI;
  if (auto it = ij.find("numbering"); it != ij.end()) {
    try {
      default_system = parse_numbering_system(get_string(*it, path + ".numbering"));
    } catch (const Error& err) {
      schema_error(path + ".numbering", err.what());
    }
  }
  const json& table = require(ij, "tooth_table", path);
  if (!table.is_array()) schema_error(path + ".tooth_table", "expected an array");
  for (std::size_t k = 0; k < table.size(); ++k) {
    const std::string tp = path + ".tooth_table[" + std::to_string(k) + "]";
    const json& tj = table[k];
    ToothEntry entry;
    entry.label = get_int(require(tj, "label", tp), tp + ".label");
    NumberingSystem system = default_system;
    try {
      if (auto it = tj.find("numbering"); it != tj.end()) system = parse_numbering_system(get_string(*it, tp + ".numbering"));
      entry.number = ToothNumber::from(system, get_int(require(tj, "tooth", tp), tp + ".tooth"));
    } catch (const Error& err) {
      if (err.kind() == ErrorKind::Schema && !err.path().empty()) throw;
      schema_error(tp + ".tooth", err.what());
    }
    entry.allow_disconnected = get_bool(tj, "allow_disconnected", tp, false);
    e.tooth_table.push_back(entry);
  }
  return e;
}

struct LoadedImage {
  std::optional<ValidatedImageRecord> record;
  std::vector<std::string> warnings;
};

LoadedImage load_image(const ImageEntry& e) {
  ImageRecord r;
  r.image_id = e.image_id;
  r.tooth_table = e.tooth_table;
  r.spacing = e.spacing;
  r.laterality = e.laterality;
  r.arch = e.arch;
  LoadedImage out;
  if (e.annotation) {
    std::vector<std::string> warns;
    AnnotationSet set = load_annotation_set(*e.annotation, &warns);
    if (set.image_id != e.image_id) {
      schema_error(e.path + ".annotation", "annotation image_id '" + set.image_id + "' does not match '" + e.image_id + "'");
    }
    RasterizedAnnotations ras = rasterize_annotations(set);
    r.bone_mask = std::move(ras.bone_mask);
    r.tooth_mask = std::move(ras.tooth_mask);
    r.cej_mask = std::move(ras.cej_mask);
    r.crown_margin_mask = std::move(ras.crown_margin_mask);
    r.other_rois = std::move(ras.other_rois);
    for (auto& w : warns) out.warnings.push_back(e.image_id + ": " + w);
    for (auto& w : ras.warnings) out.warnings.push_back(e.image_id + ": " + w);
  } else {
    r.bone_mask = png::read_binary_mask(*e.bone);
    r.tooth_mask = png::read_label_mask(*e.tooth);
    r.cej_mask = png::read_binary_mask(*e.cej);
    if (e.crown_margin) r.crown_margin_mask = png::read_binary_mask(*e.crown_margin);
  }
  if (e.cej_is_crown_margin) r.crown_margin_mask = r.cej_mask;
  out.record = validate_image_record(std::move(r));
  for (const auto& w : out.record->warnings()) out.warnings.push_back(e.image_id + ": " + w);
  return out;
}

}  // namespace

CaseRecord load_case(const std::filesystem::path& manifest_path, const LoadOptions& options) {
  const std::string source = manifest_path.string();
  const json doc = parse_json(read_text(manifest_path), source);
  const std::filesystem::path base = manifest_path.has_parent_path() ? manifest_path.parent_path() : ".";

  CaseRecord c;
  c.case_id = get_string(require(doc, "case_id", "manifest"), "manifest.case_id");
  if (c.case_id.empty()) schema_error("manifest.case_id", "must be nonempty");
  if (auto it = doc.find("patient_age"); it != doc.end() && !it->is_null()) {
    const int age = get_int(*it, "manifest.patient_age");
    if (age < 1 || age > 130) {
      throw Error(ErrorKind::Validation, "manifest.patient_age: " + std::to_string(age) + " outside 1..130",
                  "manifest.patient_age");
    }
    c.patient_age = age;
  }
  const json& images = require(doc, "images", "manifest");
  if (!images.is_array() || images.empty()) schema_error("manifest.images", "expected a nonempty array");

  std::vector<ImageEntry> entries;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < images.size(); ++i) {
    entries.push_back(parse_image_entry(images[i], "manifest.images[" + std::to_string(i) + "]", base));
    if (!ids.insert(entries.back().image_id).second) {
      schema_error("manifest.images[" + std::to_string(i) + "].image_id",
                   "duplicate image_id '" + entries.back().image_id + "'");
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const ImageEntry& a, const ImageEntry& b) { return a.image_id < b.image_id; });

  std::vector<LoadedImage> loaded(entries.size());
  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < entries.size(); ++i) loaded[i] = load_image(entries[i]);
  } else {
    for (std::size_t start = 0; start < entries.size(); start += jobs) {
      std::vector<std::future<LoadedImage>> batch;
      for (std::size_t i = start; i < std::min(entries.size(), start + jobs); ++i) {
        batch.push_back(std::async(std::launch::async, load_image, std::cref(entries[i])));
      }
      for (std::size_t k = 0; k < batch.size(); ++k) loaded[start + k] = batch[k].get();
    }
  }
  for (auto& li : loaded) {
    c.images.push_back(std::move(*li.record));
    for (auto& w : li.warnings) c.warnings.push_back(std::move(w));
  }
  return c;
}

}  // namespace rbl
