#include <doctest.h>

#include <vector>

#include "traitscale/error.hpp"
#include "traitscale/metrics.hpp"
#include "traitscale/rng.hpp"

using namespace traitscale;

TEST_CASE("compute_metrics basics") {
  SUBCASE("identity") {
    const std::vector<double> v = {1, 2, 3, 4};
    const auto m = compute_metrics(v, v);
    CHECK(m.me == doctest::Approx(0));
    CHECK(m.rmse == doctest::Approx(0));
    CHECK(*m.r == doctest::Approx(1));
  }
  SUBCASE("pure bias") {
    const std::vector<double> obs = {1, 2, 3, 4};
    std::vector<double> pred;
    for (double v : obs) pred.push_back(v + 2);
    const auto m = compute_metrics(pred, obs);
    CHECK(m.me == doctest::Approx(2));
    CHECK(m.rmse == doctest::Approx(2));
    CHECK(*m.r == doctest::Approx(1));
  }
  SUBCASE("anti-correlated two points") {
    const std::vector<double> pred = {1, 2}, obs = {2, 1};
    const auto m = compute_metrics(pred, obs);
    CHECK(m.me == doctest::Approx(0));
    CHECK(m.rmse == doctest::Approx(1));
    CHECK(*m.r == doctest::Approx(-1));
  }
  SUBCASE("zero variance signals undefined r") {
    const std::vector<double> pred = {1, 1, 1}, obs = {1, 2, 3};
    const auto m = compute_metrics(pred, obs);
    CHECK(!m.r.has_value());
  }
  SUBCASE("length mismatch and short input") {
    const std::vector<double> a = {1, 2}, b = {1};
    CHECK_THROWS_AS(compute_metrics(a, b), Error);
    CHECK_THROWS_AS(compute_metrics(b, b), Error);
  }
  SUBCASE("rmse dominates |me|") {
    RngStream rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> pred(50), obs(50);
      for (size_t i = 0; i < 50; ++i) {
        pred[i] = rng.next_normal();
        obs[i] = rng.next_normal();
      }
      const auto m = compute_metrics(pred, obs);
      CHECK(m.rmse >= std::abs(m.me) - 1e-12);
    }
  }
}

namespace {

ConfusionMatrix paper_matrix() {
  const int64_t counts[7][7] = {
      {870, 5, 7, 4, 3, 2, 0},   {3, 971, 0, 2, 0, 0, 0},  {15, 1, 406, 0, 0, 2, 0},
      {3, 2, 1, 992, 0, 2, 0},   {4, 4, 10, 4, 737, 78, 15}, {1, 1, 4, 4, 30, 934, 20},
      {0, 0, 0, 0, 4, 17, 965}};
  ConfusionMatrix m;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) m.counts[i][j] = counts[i][j];
  return m;
}

}  // namespace

TEST_CASE("published confusion matrix recomputes to the reported accuracy") {
  const auto scores = scores_from_matrix(paper_matrix());
  CHECK(scores.matrix.total() == 6123);
  CHECK(scores.overall_accuracy == doctest::Approx(0.9594969786052588).epsilon(1e-12));
  REQUIRE(scores.kappa.has_value());
  CHECK(*scores.kappa == doctest::Approx(0.9523542298209399).epsilon(1e-10));
}

TEST_CASE("confusion_and_kappa degenerate cases") {
  SUBCASE("perfect agreement") {
    std::vector<PftClass> labels;
    for (PftClass p : kAllPft)
      for (int i = 0; i < 3; ++i) labels.push_back(p);
    const auto s = confusion_and_kappa(labels, labels);
    CHECK(s.overall_accuracy == doctest::Approx(1.0));
    CHECK(*s.kappa == doctest::Approx(1.0));
  }
  SUBCASE("constant prediction over a balanced reference") {
    std::vector<PftClass> ref, pred;
    for (int i = 0; i < 10; ++i) {
      ref.push_back(i < 5 ? PftClass::ENF : PftClass::GRL);
      pred.push_back(PftClass::ENF);
    }
    const auto s = confusion_and_kappa(ref, pred);
    CHECK(s.overall_accuracy == doctest::Approx(0.5));
    CHECK(*s.kappa == doctest::Approx(0.0));
  }
  SUBCASE("identical constant vectors leave kappa undefined") {
    std::vector<PftClass> both(5, PftClass::SHL);
    const auto s = confusion_and_kappa(both, both);
    CHECK(s.overall_accuracy == doctest::Approx(1.0));
    CHECK(!s.kappa.has_value());
  }
}

TEST_CASE("kappa properties") {
  RngStream rng(11);
  std::vector<PftClass> ref, pred;
  for (int i = 0; i < 300; ++i) {
    ref.push_back(static_cast<PftClass>(1 + rng.next_below(7)));
    pred.push_back(rng.next_double() < 0.7 ? ref.back()
                                           : static_cast<PftClass>(1 + rng.next_below(7)));
  }
  const auto s = confusion_and_kappa(ref, pred);
  REQUIRE(s.kappa.has_value());
  CHECK(*s.kappa <= s.overall_accuracy + 1e-12);

  // simultaneous label permutation leaves kappa unchanged
  auto rotate = [](PftClass p) {
    return static_cast<PftClass>(1 + (pft_code(p) % kNumPft));
  };
  std::vector<PftClass> ref2, pred2;
  for (size_t i = 0; i < ref.size(); ++i) {
    ref2.push_back(rotate(ref[i]));
    pred2.push_back(rotate(pred[i]));
  }
  const auto s2 = confusion_and_kappa(ref2, pred2);
  CHECK(*s2.kappa == doctest::Approx(*s.kappa).epsilon(1e-12));
  CHECK(s2.overall_accuracy == doctest::Approx(s.overall_accuracy).epsilon(1e-12));
}

TEST_CASE("linear-interpolation quantiles") {
  std::vector<double> v = {4, 1, 3, 2};
  CHECK(quantile(v, 0.0) == doctest::Approx(1));
  CHECK(quantile(v, 1.0) == doctest::Approx(4));
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({42.0}, 0.75) == doctest::Approx(42.0));
}
