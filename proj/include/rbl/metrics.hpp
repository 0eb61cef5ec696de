#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rbl/domain.hpp"

namespace rbl {

// ---- segmentation overlap --------------------------------------------------

struct OverlapScore {
  double value = 0.0;
  bool degenerate = false;  // both masks empty; value is 1 by convention
};

// Throw Error(Structural) on dimension mismatch.
OverlapScore dice(const BinaryMask& a, const BinaryMask& b);
OverlapScore jaccard(const BinaryMask& a, const BinaryMask& b);
double pixel_accuracy(const BinaryMask& pred, const BinaryMask& ref);

// ---- classification ----------------------------------------------------------

// counts[r][p]: reference class r predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> classes);
  ConfusionMatrix(std::vector<std::string> classes, std::vector<std::vector<std::int64_t>> counts);

  std::size_t size() const { return classes_.size(); }
  const std::vector<std::string>& classes() const { return classes_; }
  std::int64_t at(std::size_t ref, std::size_t pred) const { return counts_[ref][pred]; }
  void add(std::size_t ref, std::size_t pred, std::int64_t n = 1);
  std::int64_t total() const;
  std::int64_t row_sum(std::size_t ref) const;
  std::int64_t col_sum(std::size_t pred) const;

 private:
  std::vector<std::string> classes_;
  std::vector<std::vector<std::int64_t>> counts_;
};

struct Rates {
  std::int64_t tp = 0, fn = 0, fp = 0, tn = 0;
  std::optional<double> sensitivity;  // undefined when the class is absent from the reference
  std::optional<double> specificity;  // undefined when every reference is the class
  double accuracy = 0.0;
};

// One-vs-rest collapse around `positive`. Throws Error(Precondition) on an empty matrix.
Rates rates(const ConfusionMatrix& cm, std::size_t positive);

struct Kappa {
  double value = 0.0;
  double observed = 0.0;  // p_o
  double expected = 0.0;  // p_e
  bool degenerate = false;
};

// Computed from integer sums: (N*trace - sum r_k c_k) / (N^2 - sum r_k c_k).
Kappa cohens_kappa(const ConfusionMatrix& cm);

// ---- ranking -----------------------------------------------------------------

// Mann-Whitney probability P(s+ > s-) + P(s+ = s-)/2. Pair counting up to 10^4 samples,
// midranks above. Throws Error(Precondition) unless both classes are present.
double auroc(std::span<const double> scores, std::span<const bool> labels);
double auroc_pair_count(std::span<const double> scores, std::span<const bool> labels);
double auroc_midrank(std::span<const double> scores, std::span<const bool> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};
// Threshold sweep from +inf down; starts at (0,0) and ends at (1,1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const bool> labels);
double trapezoid_area(std::span<const RocPoint> curve);

struct StageScores {
  std::vector<double> scores;
  std::vector<bool> labels;
};

// One-vs-rest labels for `target`, taken from `ref`. Score is the predicted tooth RBL%,
// or minus the CEJ-bone distance in mm for the NoBoneLoss target. Unstaged predictions are
// skipped, as are teeth without a millimetre length when the target is NoBoneLoss.
StageScores stage_scores_for_auroc(std::span<const ToothAssessment> pred, std::span<const RblStage> ref,
                                   RblStage target);
// Labels from the teeth's own stages.
StageScores stage_scores_for_auroc(std::span<const ToothAssessment> teeth, RblStage target);

// ---- t-test ------------------------------------------------------------------

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
};

// Student's pooled-variance test, or the paired test on differences.
TTestResult two_sample_t_test(std::span<const double> xs, std::span<const double> ys, bool paired);

// I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);

}  // namespace rbl
