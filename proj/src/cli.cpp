#include "rbl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "rbl/metrics.hpp"
#include "rbl/overlay.hpp"
#include "rbl/png_io.hpp"
#include "rbl/report.hpp"

namespace rbl {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string policy;
  double sigma = 0.0;
  double bin_threshold = 0.0;
  std::size_t min_area_bone = 0, min_area_tooth = 0, min_area_cej = 0;
  int jobs = 1;
  std::uint64_t seed = 1;
  CLI::Option* sigma_opt = nullptr;
  CLI::Option* threshold_opt = nullptr;
  CLI::Option* bone_opt = nullptr;
  CLI::Option* tooth_opt = nullptr;
  CLI::Option* cej_opt = nullptr;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--policy", f.policy, "JSON policy file overriding defaults");
  f.sigma_opt = sub->add_option("--sigma", f.sigma, "Gaussian smoothing sigma in px (0 disables)");
  f.threshold_opt = sub->add_option("--bin-threshold", f.bin_threshold, "re-binarization threshold in (0,1)");
  f.bone_opt = sub->add_option("--min-area-bone", f.min_area_bone, "minimum bone component area (px)");
  f.tooth_opt = sub->add_option("--min-area-tooth", f.min_area_tooth, "minimum tooth component area (px)");
  f.cej_opt = sub->add_option("--min-area-cej", f.min_area_cej, "minimum CEJ component area (px)");
  sub->add_option("--jobs", f.jobs, "worker threads")->check(CLI::Range(1, 256));
  sub->add_option("--seed", f.seed, "random seed (phantom generation)");
}

// Policy file first, then explicit flags.
AnalysisConfig make_config(const CommonFlags& f) {
  AnalysisConfig c;
  if (!f.policy.empty()) apply_policy_json(read_json_file(f.policy), c);
  if (f.sigma_opt->count()) c.maskproc.sigma = f.sigma;
  if (f.threshold_opt->count()) c.maskproc.threshold = f.bin_threshold;
  if (f.bone_opt->count()) c.maskproc.min_area_bone = f.min_area_bone;
  if (f.tooth_opt->count()) c.maskproc.min_area_tooth = f.min_area_tooth;
  if (f.cej_opt->count()) c.maskproc.min_area_cej = f.min_area_cej;
  c.validate();
  return c;
}

void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty()) {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

std::string json_escape_line(const Json& j) { return j.dump() + "\n"; }

void error_record(std::ostream& err, const std::string& kind, const std::string& message, const std::string& path) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  if (!path.empty()) j["path"] = path;
  err << json_escape_line(j);
}

// ---- analyze / diagnose / overlay ------------------------------------------------

int cmd_analyze(const std::string& manifest, const CommonFlags& f, const std::string& out_path, bool diagnose_case,
                std::optional<int> age_override, std::ostream& out) {
  const AnalysisConfig config = make_config(f);
  CaseRecord c = load_case(manifest, LoadOptions{f.jobs});
  CaseAnalysis a = analyze_case(c, config, f.jobs);
  if (age_override) a.patient_age = age_override;
  Json report;
  if (diagnose_case) {
    const auto teeth = a.all_teeth();
    const CaseAssessment merged = merge_across_images(teeth, a.case_id, a.patient_age);
    const CaseDiagnosis d = diagnose(merged, config.diagnosis);
    report = analysis_report(a, config, "diagnose", &merged, &d);
  } else {
    report = analysis_report(a, config, "analyze");
  }
  emit(out, out_path, dump_json(report));
  return a.any_unmeasurable() ? kExitUnmeasurable : kExitOk;
}

int cmd_overlay(const std::string& manifest, const CommonFlags& f, const std::string& out_dir) {
  const AnalysisConfig config = make_config(f);
  CaseRecord c = load_case(manifest, LoadOptions{f.jobs});
  CaseAnalysis a = analyze_case(c, config, f.jobs, /*keep_processed=*/true);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + out_dir, out_dir);
  for (const auto& img : a.images) {
    const Overlay o = render_overlay(*img.processed, img.teeth);
    png::write_rgb(fs::path(out_dir) / (img.image_id + ".overlay.png"), o.image);
    Json side;
    side["schema_version"] = "rbl-overlay/1";
    side["image_id"] = img.image_id;
    side["scale"] = kOverlayScale;
    Json markers = Json::array();
    for (const auto& m : o.markers) {
      Json mj;
      mj["tooth"] = m.tooth;
      mj["image_side"] = to_string(m.image_side);
      mj["kind"] = m.kind;
      mj["x"] = m.x;
      mj["y"] = m.y;
      markers.push_back(mj);
    }
    side["markers"] = markers;
    side["warnings"] = o.warnings;
    write_text_file(fs::path(out_dir) / (img.image_id + ".overlay.json"), dump_json(side));
  }
  return a.any_unmeasurable() ? kExitUnmeasurable : kExitOk;
}

// ---- eval -----------------------------------------------------------------------

// Relative paths of regular files under `root` with the given extension, sorted.
std::vector<std::string> list_files(const fs::path& root, const std::string& ext) {
  if (!fs::exists(root)) throw Error(ErrorKind::MissingFile, "no such directory: " + root.string(), root.string());
  std::vector<std::string> out;
  if (fs::is_regular_file(root)) {
    out.push_back("");
    return out;
  }
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(fs::relative(e.path(), root).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

[[noreturn]] void unmatched_error(const std::vector<std::string>& only_pred, const std::vector<std::string>& only_ref) {
  std::ostringstream msg;
  msg << "unmatched ids;";
  auto list = [&](const char* what, const std::vector<std::string>& v) {
    if (v.empty()) return;
    msg << " " << what << ":";
    for (const auto& s : v) msg << " " << s;
    msg << ";";
  };
  list("only in predictions", only_pred);
  list("only in references", only_ref);
  std::string text = msg.str();
  text.pop_back();
  throw Error(ErrorKind::Validation, text);
}

template <class Map>
void require_same_keys(const Map& pred, const Map& ref) {
  std::vector<std::string> only_pred, only_ref;
  for (const auto& [k, v] : pred) {
    if (!ref.count(k)) only_pred.push_back(k);
  }
  for (const auto& [k, v] : ref) {
    if (!pred.count(k)) only_ref.push_back(k);
  }
  if (!only_pred.empty() || !only_ref.empty()) unmatched_error(only_pred, only_ref);
}

Json eval_seg(const fs::path& pred_root, const fs::path& ref_root) {
  std::map<std::string, fs::path> pred, ref;
  for (const auto& r : list_files(pred_root, ".png")) pred[r] = r.empty() ? pred_root : pred_root / r;
  for (const auto& r : list_files(ref_root, ".png")) ref[r] = r.empty() ? ref_root : ref_root / r;
  if (pred.size() == 1 && ref.size() == 1 && pred.begin()->first.empty() != ref.begin()->first.empty()) {
    unmatched_error({pred.begin()->first}, {ref.begin()->first});
  }
  require_same_keys(pred, ref);
  if (pred.empty()) throw Error(ErrorKind::Validation, "no PNG masks to compare");

  struct Acc {
    double dice = 0, jaccard = 0, accuracy = 0;
    int n = 0;
  };
  std::map<std::string, Acc> by_kind;
  Acc all;
  Json files = Json::array();
  for (const auto& [rel, pp] : pred) {
    const BinaryMask p = png::read_binary_mask(pp);
    const BinaryMask r = png::read_binary_mask(ref.at(rel));
    const OverlapScore d = dice(p, r);
    const OverlapScore j = jaccard(p, r);
    const double acc = pixel_accuracy(p, r);
    Json fj;
    fj["file"] = rel.empty() ? pp.filename().string() : rel;
    fj["dice"] = round6(d.value);
    fj["jaccard"] = round6(j.value);
    fj["pixel_accuracy"] = round6(acc);
    fj["degenerate"] = d.degenerate;
    files.push_back(fj);
    // "<id>_<kind>.png" groups bone / tooth / cej masks.
    const std::string stem = fs::path(rel.empty() ? pp.filename().string() : rel).stem().string();
    const auto us = stem.rfind('_');
    const std::string kind = us == std::string::npos ? "mask" : stem.substr(us + 1);
    for (Acc* a : {&by_kind[kind], &all}) {
      a->dice += d.value;
      a->jaccard += j.value;
      a->accuracy += acc;
      ++a->n;
    }
  }
  auto mean = [](const Acc& a) {
    Json m;
    m["n"] = a.n;
    m["dice"] = round6(a.dice / a.n);
    m["jaccard"] = round6(a.jaccard / a.n);
    m["pixel_accuracy"] = round6(a.accuracy / a.n);
    return m;
  };
  Json out;
  out["schema_version"] = "rbl-eval/1";
  out["mode"] = "seg";
  out["mean"] = mean(all);
  Json kinds;
  for (const auto& [k, a] : by_kind) kinds[k] = mean(a);
  out["by_kind"] = kinds;
  out["files"] = files;
  return out;
}

// Report and truth documents found under a path, keyed by case_id.
std::map<std::string, Json> load_documents(const fs::path& root) {
  std::map<std::string, Json> docs;
  for (const auto& rel : list_files(root, ".json")) {
    const fs::path p = rel.empty() ? root : root / rel;
    Json doc = read_json_file(p);
    if (!doc.is_object()) continue;
    const auto it = doc.find("schema_version");
    if (it == doc.end() || !it->is_string()) continue;  // manifests, sidecars, ...
    const std::string schema = it->get<std::string>();
    if (schema != kReportSchema && schema != kTruthSchema) continue;
    const auto id = doc.find("case_id");
    if (id == doc.end() || !id->is_string()) throw Error(ErrorKind::Schema, p.string() + ": missing case_id", p.string());
    const std::string case_id = id->get<std::string>();
    if (docs.count(case_id)) throw Error(ErrorKind::Validation, "case " + case_id + " appears twice under " + root.string());
    docs.emplace(case_id, std::move(doc));
  }
  if (docs.empty()) throw Error(ErrorKind::Validation, "no reports or truth files under " + root.string());
  return docs;
}

Json eval_stage(const fs::path& pred_root, const fs::path& ref_root, double tol, const StagingPolicy& policy) {
  const auto pred_docs = load_documents(pred_root);
  const auto ref_docs = load_documents(ref_root);
  std::map<std::string, ToothStageRecord> pred, ref;
  for (const auto& [cid, doc] : pred_docs) {
    for (auto& t : read_tooth_stages(doc, cid)) pred[cid + "/" + t.image_id + "/" + std::to_string(t.fdi)] = t;
  }
  for (const auto& [cid, doc] : ref_docs) {
    for (auto& t : read_tooth_stages(doc, cid)) ref[cid + "/" + t.image_id + "/" + std::to_string(t.fdi)] = t;
  }
  require_same_keys(pred, ref);

  std::vector<std::string> names;
  for (int s = 0; s < 4; ++s) names.push_back(to_string(static_cast<RblStage>(s)));
  ConfusionMatrix strict(names), tolerant(names);
  std::vector<ToothAssessment> scored;
  std::vector<RblStage> scored_ref;
  std::vector<double> rbl_pred, rbl_ref;
  Json unstaged = Json::array();
  for (const auto& [key, p] : pred) {
    const ToothStageRecord& r = ref.at(key);
    if (!r.stage) throw Error(ErrorKind::Validation, "reference tooth without a stage: " + key);
    if (!p.stage) {
      unstaged.push_back(key);
      continue;
    }
    const auto ri = static_cast<std::size_t>(*r.stage), pi = static_cast<std::size_t>(*p.stage);
    strict.add(ri, pi);
    tolerant.add(ri, stages_agree_within_tolerance(*p.stage, p.rbl_percent, *r.stage, r.rbl_percent, tol, policy) ? ri : pi);
    ToothAssessment t;
    t.stage = p.stage;
    t.rbl_percent = p.rbl_percent;
    t.max_len1_mm = p.max_len1_mm;
    scored.push_back(t);
    scored_ref.push_back(*r.stage);
    if (p.rbl_percent && r.rbl_percent) {
      rbl_pred.push_back(*p.rbl_percent);
      rbl_ref.push_back(*r.rbl_percent);
    }
  }
  if (strict.total() == 0) throw Error(ErrorKind::Validation, "no staged teeth to compare");

  auto opt = [](const std::optional<double>& v) { return v ? Json(round6(*v)) : Json(nullptr); };
  Json per_stage = Json::array();
  for (std::size_t s = 0; s < 4; ++s) {
    const Rates rt = rates(strict, s);
    Json sj;
    sj["stage"] = names[s];
    sj["n_reference"] = strict.row_sum(s);
    sj["sensitivity"] = opt(rt.sensitivity);
    sj["specificity"] = opt(rt.specificity);
    sj["accuracy"] = round6(rt.accuracy);
    const StageScores sc = stage_scores_for_auroc(scored, scored_ref, static_cast<RblStage>(s));
    const bool both = std::count(sc.labels.begin(), sc.labels.end(), true) > 0 &&
                      std::count(sc.labels.begin(), sc.labels.end(), false) > 0;
    if (both) {
      const std::size_t n = sc.labels.size();
      std::unique_ptr<bool[]> labels(new bool[n]);
      std::copy(sc.labels.begin(), sc.labels.end(), labels.get());
      sj["auroc"] = round6(auroc(sc.scores, std::span<const bool>(labels.get(), n)));
    } else {
      sj["auroc"] = nullptr;
    }
    per_stage.push_back(sj);
  }
  auto matrix = [&](const ConfusionMatrix& cm) {
    Json m = Json::array();
    for (std::size_t i = 0; i < cm.size(); ++i) {
      Json row = Json::array();
      for (std::size_t j = 0; j < cm.size(); ++j) row.push_back(cm.at(i, j));
      m.push_back(row);
    }
    return m;
  };
  auto kappa_json = [&](const ConfusionMatrix& cm) {
    const Kappa k = cohens_kappa(cm);
    Json kj;
    kj["value"] = round6(k.value);
    kj["observed"] = round6(k.observed);
    kj["expected"] = round6(k.expected);
    kj["degenerate"] = k.degenerate;
    return kj;
  };
  Json out;
  out["schema_version"] = "rbl-eval/1";
  out["mode"] = "stage";
  out["teeth_matched"] = pred.size();
  out["teeth_compared"] = strict.total();
  out["unstaged_predictions"] = unstaged;
  out["classes"] = names;
  out["confusion"] = matrix(strict);  // rows: reference, columns: prediction
  out["per_stage"] = per_stage;
  out["kappa"] = kappa_json(strict);
  out["boundary_tolerance_percent"] = round6(tol);
  out["confusion_boundary_tolerant"] = matrix(tolerant);
  out["kappa_boundary_tolerant"] = kappa_json(tolerant);
  Json tt;
  tt["n"] = rbl_pred.size();
  if (rbl_pred.size() >= 2) {
    const TTestResult r = two_sample_t_test(rbl_pred, rbl_ref, /*paired=*/true);
    tt["t"] = std::isfinite(r.t) ? Json(round6(r.t)) : Json(r.t > 0 ? "inf" : "-inf");
    tt["df"] = round6(r.df);
    tt["p_two_sided"] = round6(r.p_two_sided);
  }
  out["rbl_paired_t_test"] = tt;
  return out;
}

Json eval_case(const fs::path& pred_root, const fs::path& ref_root) {
  const auto pred = load_documents(pred_root);
  const auto ref = load_documents(ref_root);
  require_same_keys(pred, ref);
  int matching = 0;
  int fields[4] = {0, 0, 0, 0};
  Json cases = Json::array();
  for (const auto& [cid, doc] : pred) {
    const DiagnosisRecord p = read_diagnosis(doc, cid);
    const DiagnosisRecord r = read_diagnosis(ref.at(cid), cid);
    const bool same = p == r;
    matching += same;
    fields[0] += p.is_periodontitis == r.is_periodontitis;
    fields[1] += p.extent == r.extent;
    fields[2] += p.stage == r.stage;
    fields[3] += p.grade == r.grade;
    Json cj;
    cj["case_id"] = cid;
    cj["match"] = same;
    cases.push_back(cj);
  }
  const double n = static_cast<double>(pred.size());
  Json out;
  out["schema_version"] = "rbl-eval/1";
  out["mode"] = "case";
  out["cases"] = pred.size();
  out["matching"] = matching;
  out["accuracy"] = round6(matching / n);
  Json f;
  f["is_periodontitis"] = round6(fields[0] / n);
  f["extent"] = round6(fields[1] / n);
  f["stage"] = round6(fields[2] / n);
  f["grade"] = round6(fields[3] / n);
  out["field_accuracy"] = f;
  out["per_case"] = cases;
  return out;
}

// ---- phantom --------------------------------------------------------------------

std::array<double, 4> parse_mix(const std::string& text) {
  std::array<double, 4> mix{};
  std::stringstream ss(text);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 4) break;
    try {
      std::size_t used = 0;
      mix[i] = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Validation, "--mix expects four comma-separated numbers, got '" + text + "'");
    }
    ++i;
  }
  if (i != 4 || std::getline(ss, item, ',')) {
    throw Error(ErrorKind::Validation, "--mix expects four comma-separated numbers, got '" + text + "'");
  }
  return mix;
}

struct PhantomFlags {
  std::string out_dir;
  std::string case_id = "phantom";
  int teeth = 20;
  std::string mix = "0.25,0.25,0.25,0.25";
  int age = 0;
  CLI::Option* age_opt = nullptr;
  int images_per_arch = 0;
  double degrade_density = 0.0;
  bool shuffle = false;
  std::string numbering;
};

int cmd_phantom(const PhantomFlags& p, const CommonFlags& f, std::ostream& out) {
  const AnalysisConfig config = make_config(f);
  CaseOptions opts;
  opts.images_per_arch = p.images_per_arch;
  opts.shuffle_images = p.shuffle;
  if (!p.numbering.empty()) opts.numbering = parse_numbering_system(p.numbering);
  opts.diagnosis = config.diagnosis;
  opts.staging = config.staging;
  if (p.degrade_density < 0.0 || p.degrade_density > 1.0) {
    throw Error(ErrorKind::Validation, "--degrade must be within [0, 1]");
  }
  std::optional<int> age;
  if (p.age_opt->count()) age = p.age;
  PhantomCase c = generate_case(p.case_id, p.teeth, parse_mix(p.mix), age, f.seed, opts);
  if (p.degrade_density > 0.0) {
    std::uint64_t s = f.seed * 1000003u;
    for (auto& img : c.images) img.record = degrade(img.record, p.degrade_density, ++s);
  }
  write_phantom_case(c, p.out_dir);
  out << (fs::path(p.out_dir) / "manifest.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radiographic bone loss measurement engine"};
  app.name("rbl");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonFlags analyze_flags, diagnose_flags, overlay_flags, eval_flags, phantom_flags;
  std::string manifest, out_path, out_dir;
  int age = 0;

  auto* analyze = app.add_subcommand("analyze", "measure every tooth of a case and write a report");
  analyze->add_option("manifest", manifest, "case manifest (JSON)")->required();
  analyze->add_option("--out", out_path, "report file (default: stdout)");
  add_common(analyze, analyze_flags);

  auto* diag = app.add_subcommand("diagnose", "analyze, merge across images and diagnose the case");
  diag->add_option("manifest", manifest, "case manifest (JSON)")->required();
  diag->add_option("--out", out_path, "report file (default: stdout)");
  CLI::Option* age_opt = diag->add_option("--age", age, "patient age in years (overrides the manifest)")
                             ->check(CLI::Range(1, 150));
  add_common(diag, diagnose_flags);

  std::string mode, pred_dir, ref_dir;
  double tolerance = 3.0;
  auto* eval = app.add_subcommand("eval", "compare predictions with references");
  eval->add_option("--mode", mode, "seg | stage | case")->required()->check(CLI::IsMember({"seg", "stage", "case"}));
  eval->add_option("pred", pred_dir, "prediction directory or file")->required();
  eval->add_option("ref", ref_dir, "reference directory or file")->required();
  eval->add_option("--boundary-tolerance", tolerance, "stage-boundary tolerance in RBL points (stage mode)")
      ->check(CLI::NonNegativeNumber);
  eval->add_option("--out", out_path, "evaluation file (default: stdout)");
  add_common(eval, eval_flags);

  PhantomFlags pf;
  auto* phantom = app.add_subcommand("phantom", "write a synthetic case with exact ground truth");
  phantom->add_option("--out", pf.out_dir, "output directory")->required();
  phantom->add_option("--case-id", pf.case_id, "case id");
  phantom->add_option("--teeth", pf.teeth, "number of teeth")->check(CLI::Range(1, 32));
  phantom->add_option("--mix", pf.mix, "stage mix: none,I,II,III fractions");
  pf.age_opt = phantom->add_option("--age", pf.age, "patient age (omit for unknown)")->check(CLI::Range(1, 150));
  phantom->add_option("--images-per-arch", pf.images_per_arch, "images per arch (0 = automatic)")
      ->check(CLI::Range(0, 16));
  phantom->add_option("--degrade", pf.degrade_density, "speckle noise density applied to the written masks");
  phantom->add_flag("--shuffle", pf.shuffle, "shuffle image order in the manifest");
  phantom->add_option("--numbering", pf.numbering, "FDI | Universal (random when omitted)");
  add_common(phantom, phantom_flags);

  auto* overlay = app.add_subcommand("overlay", "render landmark overlays for every image of a case");
  overlay->add_option("manifest", manifest, "case manifest (JSON)")->required();
  overlay->add_option("--out", out_dir, "output directory")->required();
  add_common(overlay, overlay_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    error_record(err, "usage", e.what(), "");
    return kExitInputError;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(manifest, analyze_flags, out_path, false, std::nullopt, out);
    if (diag->parsed()) {
      std::optional<int> a;
      if (age_opt->count()) a = age;
      return cmd_analyze(manifest, diagnose_flags, out_path, true, a, out);
    }
    if (overlay->parsed()) return cmd_overlay(manifest, overlay_flags, out_dir);
    if (phantom->parsed()) return cmd_phantom(pf, phantom_flags, out);
    if (eval->parsed()) {
      const AnalysisConfig config = make_config(eval_flags);
      Json result;
      if (mode == "seg") result = eval_seg(pred_dir, ref_dir);
      else if (mode == "stage") result = eval_stage(pred_dir, ref_dir, tolerance, config.staging);
      else result = eval_case(pred_dir, ref_dir);
      emit(out, out_path, dump_json(result));
      return kExitOk;
    }
  } catch (const Error& e) {
    error_record(err, to_string(e.kind()), e.what(), e.path());
    return kExitInputError;
  } catch (const std::exception& e) {
    error_record(err, "internal", e.what(), "");
    return kExitInternal;
  }
  return kExitInputError;
}

}  // namespace rbl
