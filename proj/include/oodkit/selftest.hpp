#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "oodkit/common.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/metrics.hpp"
#include "oodkit/nn.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/train.hpp"

namespace oodkit {

// Independent oracles for the two numeric foundations (ranking metrics and
// backprop), written against the definitions rather than the production
// code paths. `oodkit self-test` and the acceptance suite both run these.

// O(n^2) Mann-Whitney by direct pair counting: wins + half-ties over all
// (positive, negative) pairs.
inline double auroc_bruteforce(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) {
      if (p > n)
        wins += 1.0;
      else if (p == n)
        wins += 0.5;
    }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Exhaustive sweep over every observed score as a candidate threshold,
// descending; returns FPR at the largest threshold whose TPR (>= rule)
// reaches the target.
inline double fpr_sweep_bruteforce(const std::vector<double>& pos, const std::vector<double>& neg,
                                   double target_tpr) {
  std::vector<double> candidates = pos;
  candidates.insert(candidates.end(), neg.begin(), neg.end());
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (double t : candidates) {
    std::size_t tp = 0;
    for (double p : pos)
      if (p >= t) ++tp;
    if (static_cast<double>(tp) / static_cast<double>(pos.size()) >= target_tpr) {
      std::size_t fp = 0;
      for (double n : neg)
        if (n >= t) ++fp;
      return static_cast<double>(fp) / static_cast<double>(neg.size());
    }
  }
  return 1.0;  // unreachable: the minimum positive score always yields TPR = 1
}

// 200 seeded random instances, sizes <= 50, roughly half drawn from a coarse
// grid to force ties. Production auroc must match pair counting to 1e-12 and
// fpr_at_tpr must match the sweep exactly.
inline bool selftest_metrics(std::ostream& out) {
  RngEngine eng(4242);
  double worst_auroc_gap = 0.0;
  bool fpr_exact = true;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t np = 1 + uniform_index(eng, 50);
    const std::size_t nn = 1 + uniform_index(eng, 50);
    const bool gridded = inst % 2 == 0;
    auto draw = [&]() {
      const double u = uniform01(eng);
      return gridded ? std::floor(u * 10.0) / 10.0 : u;
    };
    std::vector<double> pos(np), neg(nn);
    for (double& v : pos) v = draw() + (gridded ? 0.0 : 0.2);  // overlap but separable-ish
    for (double& v : neg) v = draw();

    const double gap = std::abs(auroc(pos, neg) - auroc_bruteforce(pos, neg));
    worst_auroc_gap = std::max(worst_auroc_gap, gap);
    if (fpr_at_tpr(pos, neg, 0.95) != fpr_sweep_bruteforce(pos, neg, 0.95)) fpr_exact = false;
  }
  const bool ok = worst_auroc_gap <= 1e-12 && fpr_exact;
  out << (ok ? "ok" : "FAIL") << " metric oracles: max |auroc - pair count| = "
      << worst_auroc_gap << " (bound 1e-12), fpr_at_tpr " << (fpr_exact ? "==" : "!=")
      << " exhaustive sweep on 200 instances\n";
  return ok;
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  double min_abs_preact = 0.0;  // distance of hidden pre-activations from the ReLU kink
};

namespace detail {

// Relative error with an absolute floor: entries below 1e-3 in both analytic
// and numeric gradient are compared absolutely against 1e-3 * tolerance,
// which keeps the check meaningful without amplifying finite-difference
// roundoff on near-zero entries.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

}  // namespace detail

// Central finite differences (h = 1e-5) against backward() for every weight,
// bias and input entry of the given network and batch.
inline GradCheckResult gradient_check(const MlpParams& params, const Matrix& x,
                                      const std::vector<std::size_t>& labels, double h = 1e-5) {
  GradCheckResult res;
  res.min_abs_preact = std::numeric_limits<double>::infinity();

  const ForwardTrace trace = forward(params, x);
  for (const Matrix& z : trace.pre_hidden)
    for (double v : z.values) res.min_abs_preact = std::min(res.min_abs_preact, std::abs(v));

  const Gradients g = backward(params, trace, labels);
  const auto loss_at = [&](const MlpParams& p, const Matrix& input) {
    return cross_entropy(softmax(forward(p, input).logits), labels);
  };

  MlpParams p = params;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (std::size_t idx = 0; idx < p.weights[l].values.size(); ++idx) {
      double& v = p.weights[l].values[idx];
      const double orig = v;
      v = orig + h;
      const double up = loss_at(p, x);
      v = orig - h;
      const double down = loss_at(p, x);
      v = orig;
      res.max_rel_err = std::max(
          res.max_rel_err, detail::rel_err(g.d_weights[l].values[idx], (up - down) / (2.0 * h)));
    }
    for (std::size_t idx = 0; idx < p.biases[l].size(); ++idx) {
      double& v = p.biases[l][idx];
      const double orig = v;
      v = orig + h;
      const double up = loss_at(p, x);
      v = orig - h;
      const double down = loss_at(p, x);
      v = orig;
      res.max_rel_err = std::max(res.max_rel_err,
                                 detail::rel_err(g.d_biases[l][idx], (up - down) / (2.0 * h)));
    }
  }
  Matrix xp = x;
  for (std::size_t idx = 0; idx < xp.values.size(); ++idx) {
    const double orig = xp.values[idx];
    xp.values[idx] = orig + h;
    const double up = loss_at(params, xp);
    xp.values[idx] = orig - h;
    const double down = loss_at(params, xp);
    xp.values[idx] = orig;
    res.max_rel_err = std::max(res.max_rel_err,
                               detail::rel_err(g.d_input.values[idx], (up - down) / (2.0 * h)));
  }
  return res;
}

inline constexpr std::uint64_t kGradCheckSeed = 7;

// The canonical 2-16-8-3 instance: random Glorot weights, batch of 4. The
// seed is chosen so every hidden pre-activation sits well clear of the ReLU
// kink relative to h, keeping the finite differences valid.
inline GradCheckResult canonical_gradient_check() {
  const MlpParams params = init_params({2, 16, 8, 3}, kGradCheckSeed);
  RngEngine eng(derive_seed(kGradCheckSeed, 1));
  Matrix x(4, 2);
  for (double& v : x.values) v = normal01(eng);
  const std::vector<std::size_t> labels = {0, 1, 2, 1};
  return gradient_check(params, x, labels);
}

inline bool selftest_gradients(std::ostream& out) {
  const GradCheckResult res = canonical_gradient_check();
  const bool ok = res.max_rel_err < 1e-6 && res.min_abs_preact > 1e-4;
  out << (ok ? "ok" : "FAIL")
      << " gradient check 2-16-8-3, batch 4: max rel err = " << res.max_rel_err
      << " (bound 1e-6), min |pre-activation| = " << res.min_abs_preact << "\n";
  return ok;
}

// Exit-code style: 0 when both suites pass.
inline int run_selftest(std::ostream& out) {
  const bool m = selftest_metrics(out);
  const bool g = selftest_gradients(out);
  return m && g ? 0 : 1;
}

}  // namespace oodkit
