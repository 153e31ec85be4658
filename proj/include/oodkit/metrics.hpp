#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oodkit/common.hpp"

namespace oodkit {

// Threshold-free detection metrics. Convention throughout: OoD is the
// positive class and higher scores mean more OoD, so a perfect detector
// ranks every positive above every negative.

namespace detail {

inline void check_scores(const std::vector<double>& s, const char* which) {
  if (s.empty()) throw MetricError(std::string(which) + " score list is empty");
  for (double v : s)
    if (!std::isfinite(v)) throw MetricError(std::string(which) + " scores contain non-finite values");
}

}  // namespace detail

struct RocPoint {
  double threshold;
  double tpr;
  double fpr;
};

// Swept at every distinct score, descending; ties grouped at one threshold.
// Starts at (+inf, 0, 0) and ends at (min score, 1, 1).
struct RocCurve {
  std::vector<RocPoint> points;
};

inline RocCurve roc_curve(const std::vector<double>& pos_scores,
                          const std::vector<double>& neg_scores) {
  detail::check_scores(pos_scores, "positive");
  detail::check_scores(neg_scores, "negative");
  std::vector<double> pos = pos_scores, neg = neg_scores;
  std::sort(pos.begin(), pos.end(), std::greater<>());
  std::sort(neg.begin(), neg.end(), std::greater<>());

  std::vector<double> thresholds;
  thresholds.reserve(pos.size() + neg.size());
  thresholds.insert(thresholds.end(), pos.begin(), pos.end());
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t pi = 0, ni = 0;
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  for (double t : thresholds) {
    while (pi < pos.size() && pos[pi] >= t) ++pi;
    while (ni < neg.size() && neg[ni] >= t) ++ni;
    curve.points.push_back({t, static_cast<double>(pi) / np, static_cast<double>(ni) / nn});
  }
  return curve;
}

// Probability that a random positive outranks a random negative, ties worth
// 0.5 (Mann-Whitney). Computed by midranks in O(n log n); exactly equal to
// pairwise counting.
inline double auroc(const std::vector<double>& pos_scores,
                    const std::vector<double>& neg_scores) {
  detail::check_scores(pos_scores, "positive");
  detail::check_scores(neg_scores, "negative");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> all;
  all.reserve(pos_scores.size() + neg_scores.size());
  for (double s : pos_scores) all.push_back({s, true});
  for (double s : neg_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (all[k].positive) pos_rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(pos_scores.size());
  const double nn = static_cast<double>(neg_scores.size());
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

// FPR at the LARGEST threshold whose TPR reaches target_tpr (ties score as
// positive, matching the detector's >= rule). No interpolation.
inline double fpr_at_tpr(const std::vector<double>& pos_scores,
                         const std::vector<double>& neg_scores, double target_tpr = 0.95) {
  detail::check_scores(pos_scores, "positive");
  detail::check_scores(neg_scores, "negative");
  if (!(target_tpr > 0.0 && target_tpr <= 1.0))
    throw DomainError("target_tpr must be in (0,1], got " + std::to_string(target_tpr));

  std::vector<double> pos = pos_scores;
  std::sort(pos.begin(), pos.end(), std::greater<>());
  const double np = static_cast<double>(pos.size());
  // Smallest m with m/np >= target under the same double comparison a
  // threshold sweep would use.
  std::size_t m = static_cast<std::size_t>(std::ceil(target_tpr * np));
  m = std::min(std::max<std::size_t>(m, 1), pos.size());
  while (m > 1 && static_cast<double>(m - 1) / np >= target_tpr) --m;
  while (static_cast<double>(m) / np < target_tpr && m < pos.size()) ++m;

  const double threshold = pos[m - 1];  // m-th largest positive score
  std::size_t fp = 0;
  for (double s : neg_scores)
    if (s >= threshold) ++fp;
  return static_cast<double>(fp) / static_cast<double>(neg_scores.size());
}

// Area under the ROC polygon by tie-aware trapezoids; equals auroc() up to
// rounding.
inline double trapezoid_area(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
  }
  return area;
}

struct Histogram {
  std::vector<double> edges;       // n_bins + 1 ascending
  std::vector<std::size_t> counts; // n_bins
};

// Uniform bins over [min,max] of the scores, or over the given range with
// out-of-range values clipped into the end bins.
inline Histogram histogram(const std::vector<double>& scores, std::size_t n_bins,
                           std::optional<std::pair<double, double>> range = std::nullopt) {
  if (n_bins < 1) throw DomainError("histogram: n_bins must be >= 1");
  double lo, hi;
  if (range) {
    lo = range->first;
    hi = range->second;
    if (!(lo <= hi)) throw DomainError("histogram: invalid range");
  } else {
    detail::check_scores(scores, "histogram");
    lo = *std::min_element(scores.begin(), scores.end());
    hi = *std::max_element(scores.begin(), scores.end());
  }
  Histogram h;
  h.edges.resize(n_bins + 1);
  const double width = hi - lo;
  for (std::size_t i = 0; i <= n_bins; ++i)
    h.edges[i] = lo + width * static_cast<double>(i) / static_cast<double>(n_bins);
  h.counts.assign(n_bins, 0);
  for (double s : scores) {
    std::size_t idx = 0;
    if (width > 0.0) {
      const double t = (s - lo) / width * static_cast<double>(n_bins);
      if (t >= static_cast<double>(n_bins))
        idx = n_bins - 1;
      else if (t > 0.0)
        idx = static_cast<std::size_t>(t);
    }
    ++h.counts[idx];
  }
  return h;
}

// Overlap coefficient of two normalized histograms on identical binning:
// sum over bins of min(p, q). 0 = disjoint, 1 = identical.
inline double overlap_coefficient(const std::vector<std::size_t>& counts_a,
                                  const std::vector<std::size_t>& counts_b) {
  if (counts_a.size() != counts_b.size() || counts_a.empty())
    throw MetricError("overlap_coefficient: histograms must share binning");
  double na = 0.0, nb = 0.0;
  for (std::size_t c : counts_a) na += static_cast<double>(c);
  for (std::size_t c : counts_b) nb += static_cast<double>(c);
  if (na == 0.0 || nb == 0.0) throw MetricError("overlap_coefficient: empty histogram");
  double ovl = 0.0;
  for (std::size_t i = 0; i < counts_a.size(); ++i)
    ovl += std::min(static_cast<double>(counts_a[i]) / na, static_cast<double>(counts_b[i]) / nb);
  return ovl;
}

// The two numbers the report tables carry, per (detector, OoD set) pair.
struct DetectionEval {
  double auroc = 0.0;
  double fpr_at_95tpr = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::string detector;
};

inline DetectionEval evaluate_detection(const std::vector<double>& pos_scores,
                                        const std::vector<double>& neg_scores,
                                        const std::string& detector_tag = "") {
  DetectionEval e;
  e.auroc = auroc(pos_scores, neg_scores);
  e.fpr_at_95tpr = fpr_at_tpr(pos_scores, neg_scores, 0.95);
  e.n_pos = pos_scores.size();
  e.n_neg = neg_scores.size();
  e.detector = detector_tag;
  return e;
}

}  // namespace oodkit
