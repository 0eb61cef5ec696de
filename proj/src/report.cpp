#include "rbl/report.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rbl {

double round6(double v) {
  if (!std::isfinite(v)) return v;
  const double r = std::round(v * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;  // no negative zero
}

namespace {

Json num(double v) { return std::isfinite(v) ? Json(round6(v)) : Json(nullptr); }

Json opt(const std::optional<double>& v) { return v ? num(*v) : Json(nullptr); }

Json point(const std::optional<Point2>& p) {
  if (!p) return nullptr;
  return Json::array({num(p->x), num(p->y)});
}

Json stage_json(const std::optional<RblStage>& s) { return s ? Json(to_string(*s)) : Json(nullptr); }

Json strings(const std::vector<std::string>& v) {
  Json a = Json::array();
  for (const auto& s : v) a.push_back(s);
  return a;
}

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::Schema, path + ": " + what, path);
}

const Json& field(const Json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) schema_error(path + "." + key, "missing field");
  return *it;
}

std::optional<double> opt_number(const Json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) schema_error(path + "." + key, "expected a number");
  return it->get<double>();
}

std::optional<RblStage> opt_stage(const Json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) schema_error(path + "." + key, "expected a stage name");
  try {
    return parse_stage(it->get<std::string>());
  } catch (const Error& e) {
    schema_error(path + "." + key, e.what());
  }
}

}  // namespace

Json spacing_to_json(const std::optional<PixelSpacing>& spacing) {
  if (!spacing) return nullptr;
  Json j;
  j["row_mm_per_px"] = num(spacing->row_mm_per_px());
  j["col_mm_per_px"] = num(spacing->col_mm_per_px());
  return j;
}

Json site_to_json(const SiteMeasurement& s) {
  Json j;
  j["image_side"] = to_string(s.image_side);
  j["side"] = to_string(s.side);
  j["cej"] = point(s.cej_point);
  j["bone"] = point(s.bone_point);
  j["apex"] = point(s.apex_point);
  j["len1_px"] = num(s.len1_px);
  j["len2_px"] = num(s.len2_px);
  j["len1_mm"] = opt(s.len1_mm);
  j["len2_mm"] = opt(s.len2_mm);
  j["rbl_percent"] = opt(s.rbl_percent);
  j["stage"] = stage_json(s.stage);
  j["usable"] = s.usable();
  j["reliable"] = s.reliable();
  j["reasons"] = strings(s.reasons);
  return j;
}

Json tooth_to_json(const ToothAssessment& t) {
  Json j;
  j["tooth"] = t.tooth.fdi_code();
  j["entered"] = t.tooth.entered();
  j["numbering"] = to_string(t.tooth.system());
  j["label"] = t.label;
  j["measurable"] = t.measurable();
  j["rbl_percent"] = opt(t.rbl_percent);
  j["stage"] = stage_json(t.stage);
  j["boundary_flag"] = t.boundary_flag;
  j["max_len1_mm"] = opt(t.max_len1_mm);
  j["flags"] = strings(t.flags);
  Json sites = Json::array();
  for (const auto& s : t.sites) sites.push_back(site_to_json(s));
  j["sites"] = sites;
  return j;
}

Json truth_tooth_to_json(const ToothTruth& t) {
  Json j;
  j["tooth"] = t.tooth.fdi_code();
  j["entered"] = t.tooth.entered();
  j["numbering"] = to_string(t.tooth.system());
  j["label"] = t.label;
  j["image_id"] = t.image_id;
  j["rbl_percent"] = num(t.rbl_percent);
  j["stage"] = to_string(t.stage);
  j["boundary_flag"] = t.boundary_flag;
  j["max_len1_mm"] = num(t.max_len1_mm);
  Json sites = Json::array();
  for (const auto& s : t.sites) {
    Json sj;
    sj["image_side"] = to_string(s.image_side);
    sj["side"] = to_string(s.side);
    sj["cej"] = point(s.cej);
    sj["bone"] = point(s.bone);
    sj["apex"] = point(s.apex);
    sj["len1_px"] = num(s.len1_px);
    sj["len2_px"] = num(s.len2_px);
    sj["len1_mm"] = num(s.len1_mm);
    sj["len2_mm"] = num(s.len2_mm);
    sj["rbl_percent"] = num(s.rbl_percent);
    sj["stage"] = to_string(s.stage);
    sites.push_back(sj);
  }
  j["sites"] = sites;
  return j;
}

Json diagnosis_to_json(const CaseDiagnosis& d) {
  Json j;
  j["is_periodontitis"] = d.is_periodontitis;
  j["extent"] = d.extent ? Json(to_string(*d.extent)) : Json(nullptr);
  j["stage"] = stage_json(d.stage);
  j["grade"] = d.grade ? Json(to_string(*d.grade)) : Json(nullptr);
  Json r;
  r["worst_teeth"] = d.worst_teeth;
  r["worst_rbl_percent"] = opt(d.worst_rbl_percent);
  r["affected_teeth"] = d.affected_teeth;
  r["assessed_teeth"] = d.assessed_teeth;
  r["affected_fraction"] = opt(d.affected_fraction);
  r["grade_ratio"] = opt(d.grade_ratio);
  j["rationale"] = r;
  j["flags"] = strings(d.flags);
  return j;
}

Json diagnosis_policy_to_json(const DiagnosisPolicy& p) {
  Json j;
  j["generalized_min_fraction"] = num(p.generalized_min_fraction);
  j["min_teeth_at_stage"] = p.min_teeth_at_stage;
  j["extent_counts_any_stage"] = p.extent_counts_any_stage;
  j["grade_a_below"] = num(p.grade_a_below);
  j["grade_c_above"] = num(p.grade_c_above);
  return j;
}

Json config_to_json(const AnalysisConfig& c) {
  Json j;
  Json m;
  m["sigma"] = num(c.maskproc.sigma);
  m["bin_threshold"] = num(c.maskproc.threshold);
  m["min_area_bone"] = c.maskproc.min_area_bone;
  m["min_area_tooth"] = c.maskproc.min_area_tooth;
  m["min_area_cej"] = c.maskproc.min_area_cej;
  m["cej_smoothing"] = false;
  j["maskproc"] = m;
  Json g;
  g["axis"] = "pca";
  g["length_mode"] = "along-axis";
  g["min_tooth_px"] = c.geometry.min_tooth_px;
  g["min_eigen_ratio"] = num(c.geometry.min_eigen_ratio);
  g["band_px"] = c.geometry.band_px;
  g["overlap_px"] = c.geometry.overlap_px;
  j["geometry"] = g;
  Json s;
  s["stage1_max_percent"] = num(c.staging.stage1_max_percent);
  s["stage2_max_percent"] = num(c.staging.stage2_max_percent);
  s["no_loss_max_mm"] = num(c.staging.no_loss_max_mm);
  s["boundary_band_percent"] = num(c.staging.boundary_band_percent);
  j["staging"] = s;
  j["diagnosis"] = diagnosis_policy_to_json(c.diagnosis);
  return j;
}

void apply_policy_json(const Json& doc, AnalysisConfig& c) {
  if (!doc.is_object()) schema_error("policy", "expected an object");
  auto number = [](const Json& v, const std::string& path) {
    if (!v.is_number()) schema_error(path, "expected a number");
    return v.get<double>();
  };
  auto count = [](const Json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) schema_error(path, "expected a non-negative integer");
    return static_cast<std::size_t>(v.get<long long>());
  };
  auto boolean = [](const Json& v, const std::string& path) {
    if (!v.is_boolean()) schema_error(path, "expected true or false");
    return v.get<bool>();
  };
  for (const auto& [section, body] : doc.items()) {
    const std::string sp = "policy." + section;
    if (section != "maskproc" && section != "geometry" && section != "staging" && section != "diagnosis") {
      schema_error(sp, "unknown section");
    }
    if (!body.is_object()) schema_error(sp, "expected an object");
    for (const auto& [key, v] : body.items()) {
      const std::string p = sp + "." + key;
      if (section == "maskproc") {
        if (key == "sigma") c.maskproc.sigma = number(v, p);
        else if (key == "bin_threshold") c.maskproc.threshold = number(v, p);
        else if (key == "min_area_bone") c.maskproc.min_area_bone = count(v, p);
        else if (key == "min_area_tooth") c.maskproc.min_area_tooth = count(v, p);
        else if (key == "min_area_cej") c.maskproc.min_area_cej = count(v, p);
        else if (key != "cej_smoothing") schema_error(p, "unknown field");
      } else if (section == "geometry") {
        if (key == "min_tooth_px") c.geometry.min_tooth_px = count(v, p);
        else if (key == "min_eigen_ratio") c.geometry.min_eigen_ratio = number(v, p);
        else if (key == "band_px") c.geometry.band_px = static_cast<int>(count(v, p));
        else if (key == "overlap_px") c.geometry.overlap_px = static_cast<int>(count(v, p));
        else if (key != "axis" && key != "length_mode") schema_error(p, "unknown field");
      } else if (section == "staging") {
        if (key == "stage1_max_percent") c.staging.stage1_max_percent = number(v, p);
        else if (key == "stage2_max_percent") c.staging.stage2_max_percent = number(v, p);
        else if (key == "no_loss_max_mm") c.staging.no_loss_max_mm = number(v, p);
        else if (key == "boundary_band_percent") c.staging.boundary_band_percent = number(v, p);
        else schema_error(p, "unknown field");
      } else if (section == "diagnosis") {
        if (key == "generalized_min_fraction") c.diagnosis.generalized_min_fraction = number(v, p);
        else if (key == "min_teeth_at_stage") c.diagnosis.min_teeth_at_stage = static_cast<int>(count(v, p));
        else if (key == "extent_counts_any_stage") c.diagnosis.extent_counts_any_stage = boolean(v, p);
        else if (key == "grade_a_below") c.diagnosis.grade_a_below = number(v, p);
        else if (key == "grade_c_above") c.diagnosis.grade_c_above = number(v, p);
        else schema_error(p, "unknown field");
      }
    }
  }
}

Json analysis_report(const CaseAnalysis& a, const AnalysisConfig& config, const std::string& command,
                     const CaseAssessment* merged, const CaseDiagnosis* diagnosis) {
  Json j;
  j["schema_version"] = kReportSchema;
  j["command"] = command;
  j["case_id"] = a.case_id;
  j["patient_age"] = a.patient_age ? Json(*a.patient_age) : Json(nullptr);
  j["config"] = config_to_json(config);

  std::vector<std::string> warnings = a.warnings;
  Json images = Json::array();
  Json unmeasurable = Json::array();
  int total = 0, measurable = 0;
  for (const auto& img : a.images) {
    Json ij;
    ij["image_id"] = img.image_id;
    ij["width"] = img.width;
    ij["height"] = img.height;
    ij["spacing"] = spacing_to_json(img.spacing);
    ij["arch"] = to_string(img.arch);
    ij["laterality"] = to_string(img.laterality);
    ij["warnings"] = strings(img.warnings);
    Json teeth = Json::array();
    for (const auto& t : img.teeth) {
      teeth.push_back(tooth_to_json(t));
      ++total;
      if (t.measurable()) {
        ++measurable;
        continue;
      }
      std::set<std::string> reasons;
      for (const auto& s : t.sites) {
        for (const auto& r : s.reasons) {
          if (is_blocking_reason(r)) reasons.insert(r);
        }
      }
      Json u;
      u["image_id"] = img.image_id;
      u["tooth"] = t.tooth.fdi_code();
      u["reasons"] = std::vector<std::string>(reasons.begin(), reasons.end());
      unmeasurable.push_back(u);
    }
    ij["teeth"] = teeth;
    images.push_back(ij);
    for (const auto& w : img.warnings) warnings.push_back(img.image_id + ": " + w);
  }
  j["images"] = images;
  Json summary;
  summary["images"] = a.images.size();
  summary["teeth"] = total;
  summary["measurable"] = measurable;
  summary["unmeasurable"] = unmeasurable;
  j["summary"] = summary;

  if (merged) {
    Json teeth = Json::array();
    for (const auto& m : merged->teeth) {
      Json tj = tooth_to_json(m.assessment);
      Json row;
      row["tooth"] = tj["tooth"];
      row["source_image"] = m.assessment.image_id;
      row["images"] = m.images;
      row["measurable"] = tj["measurable"];
      row["rbl_percent"] = tj["rbl_percent"];
      row["stage"] = tj["stage"];
      row["boundary_flag"] = tj["boundary_flag"];
      row["max_len1_mm"] = tj["max_len1_mm"];
      teeth.push_back(row);
    }
    j["teeth"] = teeth;
  }
  if (diagnosis) {
    j["diagnosis"] = diagnosis_to_json(*diagnosis);
    if (diagnosis->is_periodontitis && !diagnosis->grade) {
      warnings.push_back("grade undefined: patient age unknown");
    }
  }
  j["warnings"] = strings(warnings);
  return j;
}

std::string dump_json(const Json& doc) { return doc.dump(2) + "\n"; }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string(), path.string());
  f << text;
  if (!f) throw Error(ErrorKind::Io, "failed writing " + path.string(), path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::MissingFile, "cannot open " + path.string(), path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Schema, path.string() + ": " + e.what(), path.string());
  }
}

std::vector<ToothStageRecord> read_tooth_stages(const Json& doc, const std::string& source) {
  std::vector<ToothStageRecord> out;
  const Json& images = field(doc, "images", source);
  if (!images.is_array()) schema_error(source + ".images", "expected an array");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string ip = source + ".images[" + std::to_string(i) + "]";
    const Json& img = images[i];
    const Json& id = field(img, "image_id", ip);
    if (!id.is_string()) schema_error(ip + ".image_id", "expected a string");
    const Json& teeth = field(img, "teeth", ip);
    if (!teeth.is_array()) schema_error(ip + ".teeth", "expected an array");
    for (std::size_t k = 0; k < teeth.size(); ++k) {
      const std::string tp = ip + ".teeth[" + std::to_string(k) + "]";
      const Json& t = teeth[k];
      ToothStageRecord r;
      r.image_id = id.get<std::string>();
      const Json& code = field(t, "tooth", tp);
      if (!code.is_number_integer()) schema_error(tp + ".tooth", "expected an FDI code");
      r.fdi = code.get<int>();
      r.stage = opt_stage(t, "stage", tp);
      r.rbl_percent = opt_number(t, "rbl_percent", tp);
      r.max_len1_mm = opt_number(t, "max_len1_mm", tp);
      if (auto it = t.find("boundary_flag"); it != t.end() && it->is_boolean()) r.boundary_flag = it->get<bool>();
      out.push_back(r);
    }
  }
  return out;
}

DiagnosisRecord read_diagnosis(const Json& doc, const std::string& source) {
  const char* key = doc.contains("expected_diagnosis") ? "expected_diagnosis" : "diagnosis";
  const std::string p = source + "." + key;
  const Json& d = field(doc, key, source);
  DiagnosisRecord r;
  const Json& yes = field(d, "is_periodontitis", p);
  if (!yes.is_boolean()) schema_error(p + ".is_periodontitis", "expected true or false");
  r.is_periodontitis = yes.get<bool>();
  try {
    if (auto it = d.find("extent"); it != d.end() && it->is_string()) r.extent = parse_extent(it->get<std::string>());
    if (auto it = d.find("grade"); it != d.end() && it->is_string()) r.grade = parse_grade(it->get<std::string>());
  } catch (const Error& e) {
    schema_error(p, e.what());
  }
  r.stage = opt_stage(d, "stage", p);
  return r;
}

DiagnosisRecord to_record(const CaseDiagnosis& d) {
  return {d.is_periodontitis, d.extent, d.stage, d.grade};
}

}  // namespace rbl
