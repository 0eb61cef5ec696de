#include "rbl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>

namespace rbl {

namespace {

struct Counts {
  std::size_t a = 0, b = 0, both = 0;
};

Counts overlap_counts(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::Structural, "masks differ in dimensions");
  Counts c;
  auto x = a.bits();
  auto y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    c.a += x[i];
    c.b += y[i];
    c.both += x[i] & y[i];
  }
  return c;
}

}  // namespace

OverlapScore dice(const BinaryMask& a, const BinaryMask& b) {
  const Counts c = overlap_counts(a, b);
  if (c.a + c.b == 0) return {1.0, true};
  return {2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b), false};
}

OverlapScore jaccard(const BinaryMask& a, const BinaryMask& b) {
  const Counts c = overlap_counts(a, b);
  const std::size_t uni = c.a + c.b - c.both;
  if (uni == 0) return {1.0, true};
  return {static_cast<double>(c.both) / static_cast<double>(uni), false};
}

double pixel_accuracy(const BinaryMask& pred, const BinaryMask& ref) {
  if (!pred.same_shape(ref)) throw Error(ErrorKind::Structural, "masks differ in dimensions");
  auto x = pred.bits();
  auto y = ref.bits();
  std::size_t same = 0;
  for (std::size_t i = 0; i < x.size(); ++i) same += x[i] == y[i];
  return static_cast<double>(same) / static_cast<double>(x.size());
}

// ---- confusion matrix ------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> classes)
    : classes_(std::move(classes)), counts_(classes_.size(), std::vector<std::int64_t>(classes_.size(), 0)) {
  if (classes_.empty()) throw Error(ErrorKind::Precondition, "confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> classes, std::vector<std::vector<std::int64_t>> counts)
    : ConfusionMatrix(std::move(classes)) {
  if (counts.size() != size()) throw Error(ErrorKind::Precondition, "confusion matrix must be square");
  for (std::size_t r = 0; r < size(); ++r) {
    if (counts[r].size() != size()) throw Error(ErrorKind::Precondition, "confusion matrix must be square");
    for (std::size_t p = 0; p < size(); ++p) add(r, p, counts[r][p]);
  }
}

void ConfusionMatrix::add(std::size_t ref, std::size_t pred, std::int64_t n) {
  if (ref >= size() || pred >= size()) throw Error(ErrorKind::Precondition, "class index out of range");
  if (n < 0 || counts_[ref][pred] + n < 0) throw Error(ErrorKind::Precondition, "counts must stay >= 0");
  counts_[ref][pred] += n;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts_) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t ref) const {
  return std::accumulate(counts_[ref].begin(), counts_[ref].end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::col_sum(std::size_t pred) const {
  std::int64_t s = 0;
  for (const auto& row : counts_) s += row[pred];
  return s;
}

Rates rates(const ConfusionMatrix& cm, std::size_t positive) {
  const std::int64_t n = cm.total();
  if (n == 0) throw Error(ErrorKind::Precondition, "rates of an empty confusion matrix");
  if (positive >= cm.size()) throw Error(ErrorKind::Precondition, "class index out of range");
  Rates r;
  r.tp = cm.at(positive, positive);
  r.fn = cm.row_sum(positive) - r.tp;
  r.fp = cm.col_sum(positive) - r.tp;
  r.tn = n - r.tp - r.fn - r.fp;
  if (r.tp + r.fn > 0) r.sensitivity = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  if (r.tn + r.fp > 0) r.specificity = static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp);
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(n);
  return r;
}

Kappa cohens_kappa(const ConfusionMatrix& cm) {
  const std::int64_t n = cm.total();
  if (n == 0) throw Error(ErrorKind::Precondition, "kappa of an empty confusion matrix");
  std::int64_t trace = 0;
  __int128 chance = 0;  // sum of row_k * col_k
  for (std::size_t k = 0; k < cm.size(); ++k) {
    trace += cm.at(k, k);
    chance += static_cast<__int128>(cm.row_sum(k)) * cm.col_sum(k);
  }
  const __int128 n2 = static_cast<__int128>(n) * n;
  Kappa out;
  out.observed = static_cast<double>(trace) / static_cast<double>(n);
  out.expected = static_cast<double>(chance) / static_cast<double>(n2);
  if (chance == n2) {
    out.degenerate = true;
    out.value = trace == n ? 1.0 : 0.0;
    return out;
  }
  const __int128 num = static_cast<__int128>(n) * trace - chance;
  out.value = static_cast<double>(static_cast<long double>(num) / static_cast<long double>(n2 - chance));
  return out;
}

// ---- AUROC -------------------------------------------------------------------

namespace {

void check_scores(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::Precondition, "scores and labels differ in length");
  const auto pos = std::count(labels.begin(), labels.end(), true);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw Error(ErrorKind::Precondition, "AUROC needs both positive and negative labels");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw Error(ErrorKind::Precondition, "NaN score");
  }
}

}  // namespace

double auroc_pair_count(std::span<const double> scores, std::span<const bool> labels) {
  check_scores(scores, labels);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
  // Twice the Mann-Whitney U, kept integral so the quotient is correctly rounded.
  std::int64_t twice_u = 0;
  for (double p : pos) {
    for (double q : neg) twice_u += p > q ? 2 : (p == q ? 1 : 0);
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double auroc_midrank(std::span<const double> scores, std::span<const bool> labels) {
  check_scores(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of twice the midranks of the positives: a tie group occupying ranks i+1..j has midrank (i+j+1)/2.
  std::int64_t twice_rank_sum = 0;
  std::int64_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const auto twice_mid = static_cast<std::int64_t>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        twice_rank_sum += twice_mid;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::int64_t n_neg = static_cast<std::int64_t>(scores.size()) - n_pos;
  const std::int64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auroc(std::span<const double> scores, std::span<const bool> labels) {
  return scores.size() <= 10000 ? auroc_pair_count(scores, labels) : auroc_midrank(scores, labels);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const bool> labels) {
  check_scores(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double P = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  const double N = static_cast<double>(labels.size()) - P;
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? tp : fp) += 1;
      ++j;
    }
    curve.push_back({fp / N, tp / P});
    i = j;
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * 0.5 * (curve[i].tpr + curve[i - 1].tpr);
  }
  return area;
}

StageScores stage_scores_for_auroc(std::span<const ToothAssessment> pred, std::span<const RblStage> ref,
                                   RblStage target) {
  if (pred.size() != ref.size()) throw Error(ErrorKind::Precondition, "prediction and reference sizes differ");
  StageScores out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& t = pred[i];
    if (!t.measurable()) continue;
    if (target == RblStage::NoBoneLoss) {
      if (!t.max_len1_mm) continue;
      out.scores.push_back(-*t.max_len1_mm);
    } else {
      out.scores.push_back(*t.rbl_percent);
    }
    out.labels.push_back(ref[i] == target);
  }
  return out;
}

StageScores stage_scores_for_auroc(std::span<const ToothAssessment> teeth, RblStage target) {
  std::vector<RblStage> own;
  own.reserve(teeth.size());
  for (const auto& t : teeth) own.push_back(t.stage.value_or(RblStage::NoBoneLoss));
  return stage_scores_for_auroc(teeth, own, target);
}

// ---- t-test ------------------------------------------------------------------

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sum_sq_dev(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s;
}

TTestResult finish(double diff, double se2, double df) {
  TTestResult r;
  r.df = df;
  if (se2 == 0.0) {
    if (diff == 0.0) return r;
    r.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p_two_sided = 0.0;
    return r;
  }
  r.t = diff / std::sqrt(se2);
  r.p_two_sided = regularized_incomplete_beta(0.5 * df, 0.5, df / (df + r.t * r.t));
  return r;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw Error(ErrorKind::Precondition, "incomplete beta needs a, b > 0 and x in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x below the mean; use the symmetry relation otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorKind::Precondition, "degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

TTestResult two_sample_t_test(std::span<const double> xs, std::span<const double> ys, bool paired) {
  if (xs.size() < 2 || ys.size() < 2) throw Error(ErrorKind::Precondition, "t-test needs n >= 2 per sample");
  if (paired) {
    if (xs.size() != ys.size()) throw Error(ErrorKind::Precondition, "paired t-test needs equal lengths");
    std::vector<double> d(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) d[i] = xs[i] - ys[i];
    const double n = static_cast<double>(d.size());
    const double md = mean_of(d);
    const double var = sum_sq_dev(d, md) / (n - 1.0);
    return finish(md, var / n, n - 1.0);
  }
  const double nx = static_cast<double>(xs.size()), ny = static_cast<double>(ys.size());
  const double mx = mean_of(xs), my = mean_of(ys);
  const double pooled = (sum_sq_dev(xs, mx) + sum_sq_dev(ys, my)) / (nx + ny - 2.0);
  return finish(mx - my, pooled * (1.0 / nx + 1.0 / ny), nx + ny - 2.0);
}

}  // namespace rbl
