#include "rbl/domain.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

namespace rbl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Structural: return "structural";
    case ErrorKind::MissingFile: return "missing-file";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

double Point2::norm() const { return std::hypot(x, y); }

PixelSpacing PixelSpacing::create(double row_mm_per_px, double col_mm_per_px) {
  auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!ok(row_mm_per_px) || !ok(col_mm_per_px)) {
    std::ostringstream msg;
    msg << "pixel spacing must be positive and finite (row=" << row_mm_per_px
        << ", col=" << col_mm_per_px << ")";
    throw Error(ErrorKind::Validation, msg.str());
  }
  return PixelSpacing(row_mm_per_px, col_mm_per_px);
}

double px_vector_to_mm(double dx, double dy, const PixelSpacing& spacing) {
  if (!(spacing.row_mm_per_px() > 0.0) || !(spacing.col_mm_per_px() > 0.0)) {
    throw Error(ErrorKind::Validation, "invalid pixel spacing");
  }
  if (spacing.is_isotropic()) return spacing.row_mm_per_px() * std::hypot(dx, dy);
  return std::hypot(dx * spacing.col_mm_per_px(), dy * spacing.row_mm_per_px());
}

// ---- tooth numbering -------------------------------------------------------

const char* to_string(NumberingSystem s) {
  return s == NumberingSystem::FDI ? "FDI" : "Universal";
}

NumberingSystem parse_numbering_system(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "fdi" || t == "iso") return NumberingSystem::FDI;
  if (t == "universal" || t == "ada") return NumberingSystem::Universal;
  throw Error(ErrorKind::Schema, "unknown numbering system '" + text + "'");
}

bool is_valid_fdi(int fdi) {
  const int q = fdi / 10;
  const int p = fdi % 10;
  return q >= 1 && q <= 4 && p >= 1 && p <= 8;
}

int universal_to_fdi(int universal) {
  if (universal < 1 || universal > 32) {
    throw Error(ErrorKind::Validation, "universal tooth number out of range: " + std::to_string(universal));
  }
  if (universal <= 8) return 10 + (9 - universal);    // 1..8  -> 18..11
  if (universal <= 16) return 20 + (universal - 8);   // 9..16 -> 21..28
  if (universal <= 24) return 30 + (25 - universal);  // 17..24 -> 38..31
  return 40 + (universal - 24);                       // 25..32 -> 41..48
}

int fdi_to_universal(int fdi) {
  if (!is_valid_fdi(fdi)) {
    throw Error(ErrorKind::Validation, "FDI tooth number out of range: " + std::to_string(fdi));
  }
  const int q = fdi / 10;
  const int p = fdi % 10;
  switch (q) {
    case 1: return 9 - p;
    case 2: return 8 + p;
    case 3: return 25 - p;
    default: return 24 + p;
  }
}

ToothNumber ToothNumber::from(NumberingSystem system, int entered) {
  if (system == NumberingSystem::FDI) {
    if (!is_valid_fdi(entered)) {
      throw Error(ErrorKind::Validation, "FDI tooth number out of range: " + std::to_string(entered));
    }
    return ToothNumber(entered, entered, system);
  }
  return ToothNumber(universal_to_fdi(entered), entered, system);
}

int ToothNumber::arch_index() const {
  // Patient right third molar (x8 of quadrant 1/4) is index 0.
  if (is_patient_right()) return 8 - position();
  return 7 + position();
}

bool teeth_adjacent(const ToothNumber& a, const ToothNumber& b) {
  if (a.is_upper() != b.is_upper()) return false;
  return std::abs(a.arch_index() - b.arch_index()) == 1;
}

// ---- enums -----------------------------------------------------------------

const char* to_string(Laterality v) {
  switch (v) {
    case Laterality::Left: return "left";
    case Laterality::Right: return "right";
    case Laterality::Unknown: return "unknown";
  }
  return "unknown";
}

const char* to_string(Arch v) {
  switch (v) {
    case Arch::Maxilla: return "maxilla";
    case Arch::Mandible: return "mandible";
    case Arch::Unknown: return "unknown";
  }
  return "unknown";
}

Laterality parse_laterality(const std::string& text) {
  if (text == "left") return Laterality::Left;
  if (text == "right") return Laterality::Right;
  if (text == "unknown" || text.empty()) return Laterality::Unknown;
  throw Error(ErrorKind::Schema, "unknown laterality '" + text + "'");
}

Arch parse_arch(const std::string& text) {
  if (text == "maxilla" || text == "upper") return Arch::Maxilla;
  if (text == "mandible" || text == "lower") return Arch::Mandible;
  if (text == "unknown" || text.empty()) return Arch::Unknown;
  throw Error(ErrorKind::Schema, "unknown arch '" + text + "'");
}

const char* to_string(RoiKind k) {
  switch (k) {
    case RoiKind::BoneArea: return "bone_area";
    case RoiKind::Tooth: return "tooth";
    case RoiKind::Other: return "other";
    case RoiKind::Cej: return "cej";
  }
  return "other";
}

const char* to_string(RblStage s) {
  switch (s) {
    case RblStage::NoBoneLoss: return "no_bone_loss";
    case RblStage::StageI: return "stage_I";
    case RblStage::StageII: return "stage_II";
    case RblStage::StageIII: return "stage_III";
  }
  return "no_bone_loss";
}

RblStage parse_stage(const std::string& text) {
  if (text == "no_bone_loss" || text == "0") return RblStage::NoBoneLoss;
  if (text == "stage_I" || text == "I" || text == "1") return RblStage::StageI;
  if (text == "stage_II" || text == "II" || text == "2") return RblStage::StageII;
  if (text == "stage_III" || text == "III" || text == "3") return RblStage::StageIII;
  throw Error(ErrorKind::Schema, "unknown stage '" + text + "'");
}

const char* to_string(ImageSide s) { return s == ImageSide::Left ? "left" : "right"; }

const char* to_string(SiteSide s) {
  switch (s) {
    case SiteSide::Mesial: return "mesial";
    case SiteSide::Distal: return "distal";
    case SiteSide::LeftUnmapped: return "left-unmapped";
    case SiteSide::RightUnmapped: return "right-unmapped";
  }
  return "left-unmapped";
}

bool is_blocking_reason(const std::string& code) {
  static const std::array<const char*, 7> blocking = {
      reason::kNoCej,           reason::kNoBoneIntersection, reason::kAxisUndefined,
      reason::kToothTooSmall,   reason::kBoneBeyondApex,     reason::kZeroRootLength,
      reason::kCejApicalOfApex,
  };
  return std::any_of(blocking.begin(), blocking.end(), [&](const char* b) { return code == b; });
}

bool SiteMeasurement::usable() const {
  if (!rbl_percent) return false;
  return std::none_of(reasons.begin(), reasons.end(), is_blocking_reason);
}

bool SiteMeasurement::reliable() const { return usable() && reasons.empty(); }

void SiteMeasurement::add_reason(const std::string& code) {
  if (!has_reason(code)) reasons.push_back(code);
}

bool SiteMeasurement::has_reason(const std::string& code) const {
  return std::find(reasons.begin(), reasons.end(), code) != reasons.end();
}

const SiteMeasurement* ToothAssessment::site(SiteSide side) const {
  for (const auto& s : sites) {
    if (s.side == side) return &s;
  }
  return nullptr;
}

// ---- records ---------------------------------------------------------------

const ToothEntry* ImageRecord::find_label(int label) const {
  for (const auto& e : tooth_table) {
    if (e.label == label) return &e;
  }
  return nullptr;
}

namespace {

std::string dims(int w, int h) { return std::to_string(w) + "x" + std::to_string(h); }

}  // namespace

ValidatedImageRecord validate_image_record(ImageRecord record) {
  const std::string& id = record.image_id;
  if (id.empty()) throw Error(ErrorKind::Structural, "image_id is empty");
  const int w = record.bone_mask.width();
  const int h = record.bone_mask.height();
  if (w < 1 || h < 1) {
    throw Error(ErrorKind::Structural, "image '" + id + "': bone_mask has no pixels", "bone_mask");
  }
  auto check = [&](int mw, int mh, const char* name) {
    if (mw != w || mh != h) {
      throw Error(ErrorKind::Structural,
                  "image '" + id + "': " + name + " is " + dims(mw, mh) + " but bone_mask is " + dims(w, h),
                  name);
    }
  };
  check(record.tooth_mask.width(), record.tooth_mask.height(), "tooth_mask");
  check(record.cej_mask.width(), record.cej_mask.height(), "cej_mask");
  if (record.crown_margin_mask) {
    check(record.crown_margin_mask->width(), record.crown_margin_mask->height(), "crown_margin_mask");
  }

  std::set<int> table_labels;
  std::set<int> table_teeth;
  for (const auto& e : record.tooth_table) {
    if (e.label < 1 || e.label > 254) {
      throw Error(ErrorKind::Structural,
                  "image '" + id + "': tooth_table label " + std::to_string(e.label) + " outside 1..254",
                  "tooth_table");
    }
    if (!table_labels.insert(e.label).second) {
      throw Error(ErrorKind::Structural,
                  "image '" + id + "': tooth_table lists label " + std::to_string(e.label) + " twice",
                  "tooth_table");
    }
    if (!table_teeth.insert(e.number.fdi_code()).second) {
      throw Error(ErrorKind::Structural,
                  "image '" + id + "': tooth_table lists tooth " + std::to_string(e.number.entered()) + " twice",
                  "tooth_table");
    }
  }

  const std::vector<int> present = record.tooth_mask.present_labels();
  for (int label : present) {
    if (!table_labels.count(label)) {
      throw Error(ErrorKind::Structural,
                  "image '" + id + "': tooth_mask contains label " + std::to_string(label) +
                      " absent from tooth_table",
                  "tooth_mask");
    }
  }

  ValidatedImageRecord out(std::move(record));
  const ImageRecord& r = out.record_;
  if (!r.spacing) out.limitations_.push_back(reason::kNoSpacing);
  for (const auto& e : r.tooth_table) {
    if (std::find(present.begin(), present.end(), e.label) == present.end()) {
      out.warnings_.push_back("tooth " + std::to_string(e.number.entered()) + " (label " +
                              std::to_string(e.label) + ") has no pixels");
      continue;
    }
    if (e.allow_disconnected) continue;
    const auto comps = label_components(r.tooth_mask.region(e.label), Connectivity::Eight);
    if (comps.count() > 1) {
      out.warnings_.push_back("tooth " + std::to_string(e.number.entered()) + " (label " +
                              std::to_string(e.label) + ") is split into " +
                              std::to_string(comps.count()) + " components");
    }
  }
  return out;
}

}  // namespace rbl
