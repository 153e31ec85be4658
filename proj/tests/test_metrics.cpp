#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include <oodkit/metrics.hpp>
#include <oodkit/rng.hpp>
#include <oodkit/selftest.hpp>

using namespace oodkit;

TEST_CASE("auroc on pinned examples") {
  REQUIRE(auroc({0.9, 0.8}, {0.1, 0.2}) == 1.0);
  // 6 pairs, one tie at 0.8 worth 0.5: (5 wins + 0.5) / 6
  REQUIRE(auroc({0.8, 0.9}, {0.1, 0.4, 0.8}) == Catch::Approx(5.5 / 6.0).margin(1e-15));
  // indistinguishable populations
  REQUIRE(auroc({0.3, 0.7}, {0.3, 0.7}) == 0.5);
}

TEST_CASE("auroc complement symmetry") {
  RngEngine eng(31);
  std::vector<double> a(17), b(23);
  for (double& v : a) v = uniform01(eng);
  for (double& v : b) v = uniform01(eng);
  REQUIRE(auroc(a, b) + auroc(b, a) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("auroc invariant under strictly increasing transforms") {
  RngEngine eng(32);
  std::vector<double> pos(30), neg(40);
  for (double& v : pos) v = std::floor(uniform01(eng) * 8.0) / 8.0 + 0.25;  // ties on a grid
  for (double& v : neg) v = std::floor(uniform01(eng) * 8.0) / 8.0;
  const double base = auroc(pos, neg);

  auto mapped = [&](auto f) {
    std::vector<double> p = pos, n = neg;
    for (double& v : p) v = f(v);
    for (double& v : n) v = f(v);
    return auroc(p, n);
  };
  REQUIRE(mapped([](double v) { return std::exp(v); }) == Catch::Approx(base).margin(1e-12));
  REQUIRE(mapped([](double v) { return 3.5 * v - 2.0; }) == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("auroc matches brute-force pair counting on 200 random instances") {
  RngEngine eng(33);
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t np = 1 + uniform_index(eng, 50);
    const std::size_t nn = 1 + uniform_index(eng, 50);
    std::vector<double> pos(np), neg(nn);
    // Half the instances draw from a coarse grid so duplicates are frequent.
    const bool grid = inst % 2 == 0;
    for (double& v : pos) v = grid ? std::floor(uniform01(eng) * 6.0) : uniform01(eng);
    for (double& v : neg) v = grid ? std::floor(uniform01(eng) * 6.0) : uniform01(eng);
    REQUIRE(std::abs(auroc(pos, neg) - auroc_bruteforce(pos, neg)) <= 1e-12);
  }
}

TEST_CASE("fpr_at_tpr pinned example and edge cases") {
  // Largest threshold catching >= 95% of the 5 positives is 0.5 (all 5);
  // one negative (0.55) sits above it.
  REQUIRE(fpr_at_tpr({0.9, 0.8, 0.7, 0.6, 0.5}, {0.4, 0.55, 0.3}, 0.95) ==
          Catch::Approx(1.0 / 3.0).margin(1e-15));
  REQUIRE(fpr_at_tpr({0.9, 0.8}, {0.1, 0.2}, 0.95) == 0.0);   // separable
  REQUIRE(fpr_at_tpr({0.1, 0.2}, {0.9, 0.8}, 0.95) == 1.0);   // inverted
  REQUIRE_THROWS_AS(fpr_at_tpr({0.5}, {0.4}, 0.0), DomainError);
  REQUIRE_THROWS_AS(fpr_at_tpr({0.5}, {0.4}, 1.5), DomainError);
}

TEST_CASE("fpr_at_tpr matches exhaustive sweep on random instances and targets") {
  RngEngine eng(34);
  const double targets[] = {0.5, 0.8, 0.9, 0.95, 0.99, 1.0};
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t np = 1 + uniform_index(eng, 50);
    const std::size_t nn = 1 + uniform_index(eng, 50);
    std::vector<double> pos(np), neg(nn);
    const bool grid = inst % 2 == 0;
    for (double& v : pos) v = grid ? std::floor(uniform01(eng) * 6.0) : uniform01(eng);
    for (double& v : neg) v = grid ? std::floor(uniform01(eng) * 6.0) : uniform01(eng);
    const double t = targets[inst % 6];
    REQUIRE(fpr_at_tpr(pos, neg, t) == fpr_sweep_bruteforce(pos, neg, t));
  }
}

TEST_CASE("fpr_at_tpr threshold selection is float-consistent at exact fractions") {
  // 19/20 == 0.95 under double comparison; the 19th-largest positive must be
  // the chosen threshold, not the 20th.
  std::vector<double> pos(20);
  for (int i = 0; i < 20; ++i) pos[i] = 1.0 - 0.01 * i;  // 1.00 down to 0.81
  const std::vector<double> neg = {0.815, 0.5};           // above pos[19]=0.81, below pos[18]=0.82
  // threshold = pos[18] = 0.82 -> only TPR 19/20 = 0.95 is needed; 0.815 < 0.82
  REQUIRE(fpr_at_tpr(pos, neg, 0.95) == fpr_sweep_bruteforce(pos, neg, 0.95));
  REQUIRE(fpr_at_tpr(pos, neg, 0.95) == 0.0);
}

TEST_CASE("roc_curve endpoints, monotonicity, and perfect separation") {
  const std::vector<double> pos = {1.0, 0.9, 0.8};
  const std::vector<double> neg = {0.2, 0.1, 0.3};
  const RocCurve c = roc_curve(pos, neg);
  REQUIRE(c.points.front().tpr == 0.0);
  REQUIRE(c.points.front().fpr == 0.0);
  REQUIRE(c.points.back().tpr == 1.0);
  REQUIRE(c.points.back().fpr == 1.0);
  bool hits_perfect = false;
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    REQUIRE(c.points[i].tpr >= c.points[i - 1].tpr);
    REQUIRE(c.points[i].fpr >= c.points[i - 1].fpr);
    REQUIRE(c.points[i].threshold < c.points[i - 1].threshold);
    if (c.points[i].tpr == 1.0 && c.points[i].fpr == 0.0) hits_perfect = true;
  }
  REQUIRE(hits_perfect);
}

TEST_CASE("roc_curve of identical populations lies on the diagonal") {
  const std::vector<double> s = {0.1, 0.5, 0.5, 0.9};
  const RocCurve c = roc_curve(s, s);
  for (const RocPoint& p : c.points) REQUIRE(p.tpr == p.fpr);
}

TEST_CASE("trapezoid area equals auroc") {
  RngEngine eng(35);
  for (int inst = 0; inst < 50; ++inst) {
    std::vector<double> pos(1 + uniform_index(eng, 30)), neg(1 + uniform_index(eng, 30));
    const bool grid = inst % 2 == 0;
    for (double& v : pos) v = grid ? std::floor(uniform01(eng) * 5.0) : uniform01(eng);
    for (double& v : neg) v = grid ? std::floor(uniform01(eng) * 5.0) : uniform01(eng);
    REQUIRE(trapezoid_area(roc_curve(pos, neg)) == Catch::Approx(auroc(pos, neg)).margin(1e-9));
  }
}

TEST_CASE("metric errors on empty or non-finite input") {
  REQUIRE_THROWS_AS(auroc({}, {0.5}), MetricError);
  REQUIRE_THROWS_AS(auroc({0.5}, {}), MetricError);
  REQUIRE_THROWS_AS(roc_curve({}, {0.5}), MetricError);
  REQUIRE_THROWS_AS(fpr_at_tpr({0.5}, {}, 0.95), MetricError);
  const double nan = std::nan("");
  REQUIRE_THROWS_AS(auroc({nan}, {0.5}), MetricError);
}

TEST_CASE("histogram basics") {
  const Histogram h = histogram({0.0, 1.0}, 2);
  REQUIRE(h.counts == std::vector<std::size_t>{1, 1});
  REQUIRE(h.edges.size() == 3);
  REQUIRE(h.edges[0] == 0.0);
  REQUIRE(h.edges[2] == 1.0);
}

TEST_CASE("histogram counts sum to n and clip out-of-range into end bins") {
  RngEngine eng(36);
  std::vector<double> s(500);
  for (double& v : s) v = uniform_range(eng, -2.0, 2.0);
  const Histogram h = histogram(s, 7, std::pair<double, double>{-1.0, 1.0});
  std::size_t total = 0;
  for (std::size_t c : h.counts) total += c;
  REQUIRE(total == 500);
  REQUIRE(h.counts.front() > 0);  // clipped low outliers
  REQUIRE(h.counts.back() > 0);   // clipped high outliers
}

TEST_CASE("histogram of constant scores puts all mass in one bin") {
  const Histogram h = histogram({2.5, 2.5, 2.5}, 4);
  std::size_t nonzero = 0, total = 0;
  for (std::size_t c : h.counts) {
    if (c) ++nonzero;
    total += c;
  }
  REQUIRE(nonzero == 1);
  REQUIRE(total == 3);
}

TEST_CASE("overlap_coefficient: disjoint 0, identical 1, bounds checked") {
  REQUIRE(overlap_coefficient({5, 0, 0}, {0, 0, 7}) == 0.0);
  REQUIRE(overlap_coefficient({2, 4, 2}, {1, 2, 1}) == Catch::Approx(1.0).margin(1e-12));
  const double mid = overlap_coefficient({4, 4, 0}, {0, 4, 4});
  REQUIRE(mid == Catch::Approx(0.5).margin(1e-12));
  REQUIRE_THROWS_AS(overlap_coefficient({1, 2}, {1, 2, 3}), MetricError);
  REQUIRE_THROWS_AS(overlap_coefficient({0, 0}, {1, 2}), MetricError);
}

TEST_CASE("evaluate_detection bundles both metrics") {
  const DetectionEval e = evaluate_detection({0.9, 0.8, 0.7}, {0.1, 0.2}, "demo");
  REQUIRE(e.auroc == 1.0);
  REQUIRE(e.fpr_at_95tpr == 0.0);
  REQUIRE(e.n_pos == 3);
  REQUIRE(e.n_neg == 2);
  REQUIRE(e.detector == "demo");
}

TEST_CASE("selftest metric suite passes") {
  std::ostringstream out;
  REQUIRE(selftest_metrics(out));
}
