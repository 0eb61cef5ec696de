#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "rbl/error.hpp"
#include "rbl/metrics.hpp"
#include "test_util.hpp"

using namespace rbl;

namespace {

std::vector<bool> bools(std::initializer_list<int> v) {
  std::vector<bool> out;
  for (int x : v) out.push_back(x != 0);
  return out;
}

// span<const bool> cannot view a vector<bool>
struct Labels {
  explicit Labels(const std::vector<bool>& v) : data(new bool[v.size()]), n(v.size()) {
    for (std::size_t i = 0; i < n; ++i) data[i] = v[i];
  }
  std::span<const bool> span() const { return {data.get(), n}; }
  std::unique_ptr<bool[]> data;
  std::size_t n;
};

double auc(const std::vector<double>& s, const std::vector<bool>& l) { return auroc(s, Labels(l).span()); }

}  // namespace

TEST_CASE("overlap examples") {
  const BinaryMask a = testutil::rect_mask(10, 10, 0, 0, 4, 9);   // 50 px
  const BinaryMask b = testutil::rect_mask(10, 10, 0, 0, 9, 4);   // 50 px, 25 shared
  CHECK(dice(a, b).value == doctest::Approx(0.5));
  CHECK(jaccard(a, b).value == doctest::Approx(25.0 / 75.0));
  CHECK(pixel_accuracy(a, b) == doctest::Approx(0.5));
  CHECK(dice(a, a).value == 1.0);
  const BinaryMask empty(10, 10);
  CHECK(dice(empty, empty).degenerate);
  CHECK(dice(empty, empty).value == 1.0);
  CHECK(dice(a, empty).value == 0.0);
  CHECK_THROWS_AS(dice(a, BinaryMask(9, 10)), Error);
}

TEST_CASE("dice and jaccard are linked") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    const auto a = testutil::random_mask(rng, 17, 13, 0.3), b = testutil::random_mask(rng, 17, 13, 0.6);
    const double j = jaccard(a, b).value;
    CHECK(dice(a, b).value == doctest::Approx(2 * j / (1 + j)).epsilon(1e-12));
    CHECK(dice(a, b).value == dice(b, a).value);
  }
}

TEST_CASE("kappa") {
  const ConfusionMatrix cm({"a", "b"}, {{20, 5}, {10, 15}});
  const Kappa k = cohens_kappa(cm);
  CHECK(k.value == 0.4);
  CHECK(k.observed == doctest::Approx(0.7));
  CHECK(k.expected == doctest::Approx(0.5));
  ConfusionMatrix one({"a", "b"});
  one.add(0, 0, 7);
  CHECK(cohens_kappa(one).degenerate);
}

TEST_CASE("rates") {
  const ConfusionMatrix cm({"a", "b", "c"}, {{5, 1, 0}, {2, 8, 0}, {0, 0, 4}});
  const Rates r = rates(cm, 0);
  CHECK(r.tp == 5);
  CHECK(r.fn == 1);
  CHECK(r.fp == 2);
  CHECK(r.tn == 12);
  CHECK(*r.sensitivity == doctest::Approx(5.0 / 6.0));
  CHECK(*r.specificity == doctest::Approx(12.0 / 14.0));
  ConfusionMatrix absent({"a", "b"}, {{0, 0}, {1, 3}});
  CHECK_FALSE(rates(absent, 0).sensitivity);
  CHECK_THROWS_AS(rates(ConfusionMatrix({"a"}), 0), Error);
}

TEST_CASE("auroc examples") {
  CHECK(auc({0.9, 0.8, 0.3, 0.1}, bools({1, 1, 0, 0})) == 1.0);
  CHECK(auc({0.1, 0.2, 0.8, 0.9}, bools({1, 1, 0, 0})) == 0.0);
  CHECK(auc({0.5, 0.5, 0.5}, bools({1, 0, 0})) == 0.5);
  CHECK(auc({0.8, 0.4, 0.6, 0.2}, bools({1, 1, 0, 0})) == 0.75);
  CHECK_THROWS_AS(auc({0.1, 0.2}, bools({1, 1})), Error);
}

TEST_CASE("auroc is invariant to monotone transforms") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int k = 0; k < 30; ++k) {
    std::vector<double> s(80), t(80);
    std::vector<bool> l(80);
    for (int i = 0; i < 80; ++i) {
      l[i] = i % 3 == 0;
      s[i] = g(rng) + (l[i] ? 0.5 : 0.0);
      t[i] = std::exp(3.0 * s[i]) + 2.0;
    }
    CHECK(auc(s, l) == doctest::Approx(auc(t, l)).epsilon(1e-12));
    Labels lab(l);
    CHECK(auroc_pair_count(s, lab.span()) == doctest::Approx(auroc_midrank(s, lab.span())).epsilon(1e-12));
    const auto curve = roc_curve(s, lab.span());
    CHECK(curve.front().fpr == 0.0);
    CHECK(curve.back().tpr == 1.0);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i].fpr >= curve[i - 1].fpr);
      CHECK(curve[i].tpr >= curve[i - 1].tpr);
    }
  }
}

TEST_CASE("stage scores") {
  ToothAssessment a, b, c;
  a.rbl_percent = 20.0;
  a.stage = RblStage::StageII;
  a.max_len1_mm = 3.0;
  b.rbl_percent = 5.0;
  b.stage = RblStage::NoBoneLoss;
  b.max_len1_mm = 0.8;
  c.rbl_percent = 40.0;
  c.stage = RblStage::StageIII;  // no mm length
  const std::vector<ToothAssessment> teeth = {a, b, c};
  const auto ii = stage_scores_for_auroc(teeth, RblStage::StageII);
  CHECK(ii.scores == std::vector<double>{20.0, 5.0, 40.0});
  CHECK(ii.labels == bools({1, 0, 0}));
  const auto none = stage_scores_for_auroc(teeth, RblStage::NoBoneLoss);
  CHECK(none.scores == std::vector<double>{-3.0, -0.8});
  CHECK(none.labels == bools({0, 1}));
  const std::vector<RblStage> ref = {RblStage::StageIII, RblStage::StageIII, RblStage::StageIII};
  CHECK(stage_scores_for_auroc(teeth, ref, RblStage::StageIII).labels == bools({1, 1, 1}));
  CHECK_THROWS_AS(stage_scores_for_auroc(teeth, std::span(ref).first(2), RblStage::StageI), Error);
}

TEST_CASE("t-test") {
  const std::vector<double> x = {1, 2, 3, 4}, y = {11, 12, 13, 14};
  const TTestResult r = two_sample_t_test(x, y, false);
  CHECK(r.t == doctest::Approx(-10.954451150103322));
  CHECK(r.df == 6.0);
  CHECK(r.p_two_sided < 1e-4);
  const TTestResult s = two_sample_t_test(y, x, false);
  CHECK(s.t == doctest::Approx(-r.t));
  CHECK(s.p_two_sided == doctest::Approx(r.p_two_sided));
  CHECK(two_sample_t_test(x, x, false).p_two_sided == doctest::Approx(1.0));

  const std::vector<double> p = {1, 2, 3, 4}, q = {2, 2, 5, 7};
  const TTestResult pr = two_sample_t_test(p, q, true);
  CHECK(pr.df == 3.0);
  CHECK(pr.t == doctest::Approx(-1.5 / std::sqrt(5.0 / 12.0)));
  CHECK_THROWS_AS(two_sample_t_test(p, std::vector<double>{1, 2}, true), Error);

  CHECK(student_t_cdf(0.0, 5.0) == doctest::Approx(0.5));
  CHECK(student_t_cdf(2.015048373, 5.0) == doctest::Approx(0.95).epsilon(1e-8));
  CHECK(regularized_incomplete_beta(2.0, 3.0, 0.4) == doctest::Approx(0.5248).epsilon(1e-12));
}
