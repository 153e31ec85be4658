#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oodkit/common.hpp"
#include "oodkit/data.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/nn.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/train.hpp"

namespace oodkit {

// Every scorer in this file follows one orientation contract: higher score
// means more OoD. Confidence-style baselines are therefore reported as
// 1 - confidence, and for models with an abstention output the confidence
// baselines read the K known-class columns only (softmax over the known
// logits, which equals renormalizing the full softmax).

enum class DetectorKind {
  abstention,
  max_softmax,
  entropy,
  temp_softmax,
  odin,
  mahalanobis,
  mc_dropout,
  ensemble,
};

inline const char* detector_kind_name(DetectorKind k) {
  switch (k) {
    case DetectorKind::abstention: return "abstention";
    case DetectorKind::max_softmax: return "max_softmax";
    case DetectorKind::entropy: return "entropy";
    case DetectorKind::temp_softmax: return "temp_softmax";
    case DetectorKind::odin: return "odin";
    case DetectorKind::mahalanobis: return "mahalanobis";
    case DetectorKind::mc_dropout: return "mc_dropout";
    case DetectorKind::ensemble: return "ensemble";
  }
  throw DomainError("unknown detector kind");
}

inline DetectorKind parse_detector_kind(const std::string& s) {
  for (DetectorKind k :
       {DetectorKind::abstention, DetectorKind::max_softmax, DetectorKind::entropy,
        DetectorKind::temp_softmax, DetectorKind::odin, DetectorKind::mahalanobis,
        DetectorKind::mc_dropout, DetectorKind::ensemble})
    if (s == detector_kind_name(k)) return k;
  throw ConfigError("unknown detector kind '" + s + "'");
}

// A fully resolved detector: every parameter its kind uses is present and
// no foreign parameter is set. Config-level defaults and temperature fitting
// happen in bench before specs reach this form.
struct DetectorSpec {
  DetectorKind kind = DetectorKind::abstention;
  std::optional<double> temperature;        // temp_softmax, odin
  std::optional<double> epsilon;            // odin
  std::optional<std::size_t> n_passes;      // mc_dropout
  std::optional<double> dropout_p;          // mc_dropout
  std::optional<std::size_t> n_members;     // ensemble

  void validate() const {
    const std::string name = detector_kind_name(kind);
    const bool wants_t = kind == DetectorKind::temp_softmax || kind == DetectorKind::odin;
    const bool wants_eps = kind == DetectorKind::odin;
    const bool wants_mc = kind == DetectorKind::mc_dropout;
    const bool wants_members = kind == DetectorKind::ensemble;

    auto forbid = [&](bool set, const char* param) {
      if (set) throw ConfigError("detector '" + name + "' does not take parameter " + param);
    };
    auto require = [&](bool set, const char* param) {
      if (!set) throw ConfigError("detector '" + name + "' requires parameter " + param);
    };
    if (wants_t) require(temperature.has_value(), "temperature");
    else forbid(temperature.has_value(), "temperature");
    if (wants_eps) require(epsilon.has_value(), "epsilon");
    else forbid(epsilon.has_value(), "epsilon");
    if (wants_mc) {
      require(n_passes.has_value(), "n_passes");
      require(dropout_p.has_value(), "dropout_p");
    } else {
      forbid(n_passes.has_value(), "n_passes");
      forbid(dropout_p.has_value(), "dropout_p");
    }
    if (wants_members) require(n_members.has_value(), "n_members");
    else forbid(n_members.has_value(), "n_members");

    if (temperature && !(*temperature > 0.0))
      throw ConfigError("detector '" + name + "': temperature must be > 0");
    if (epsilon && !(*epsilon >= 0.0))
      throw ConfigError("detector '" + name + "': epsilon must be >= 0");
    if (n_passes && *n_passes < 1)
      throw ConfigError("detector '" + name + "': n_passes must be >= 1");
    if (dropout_p && !(*dropout_p >= 0.0 && *dropout_p < 1.0))
      throw ConfigError("detector '" + name + "': dropout_p must be in [0,1)");
    if (n_members && *n_members < 2)
      throw ConfigError("detector '" + name + "': n_members must be >= 2");
  }
};

struct ScoreVector {
  std::vector<double> scores;  // one per input row, higher = more OoD
  DetectorSpec spec;
};

// Binary decisions: 1 flags OoD when score >= delta (ties abstain).
inline std::vector<int> detect(const std::vector<double>& scores, double delta) {
  if (!std::isfinite(delta)) throw DomainError("detect: threshold must be finite");
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= delta ? 1 : 0;
  return out;
}

namespace detail {

inline void check_input(const MlpModel& model, const Matrix& x, const char* who) {
  if (x.cols != model.input_dim())
    throw ShapeError(std::string(who) + ": input width " + std::to_string(x.cols) +
                     " does not match model input " + std::to_string(model.input_dim()));
  if (x.rows == 0) throw ShapeError(std::string(who) + ": empty batch");
}

// The K known-class columns of the logits; identity for plain models.
inline Matrix known_logits(const MlpModel& model, const Matrix& logits) {
  if (!model.has_abstention) return logits;
  const std::size_t k = model.num_known_classes;
  Matrix out(logits.rows, k);
  for (std::size_t i = 0; i < logits.rows; ++i)
    std::copy_n(logits.row_ptr(i), k, out.row_ptr(i));
  return out;
}

inline std::vector<double> one_minus_rowmax(const Matrix& probs) {
  std::vector<double> out(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const double* row = probs.row_ptr(i);
    out[i] = 1.0 - *std::max_element(row, row + probs.cols);
  }
  return out;
}

}  // namespace detail

// The paper's detector: the abstention-class softmax probability itself.
inline ScoreVector score_abstention(const MlpModel& model, const Matrix& x) {
  detail::check_input(model, x, "score_abstention");
  if (!model.has_abstention)
    throw UnsupportedError("score_abstention: model has no abstention output");
  const Matrix probs = softmax(forward(model.params, x).logits);
  ScoreVector sv;
  sv.spec.kind = DetectorKind::abstention;
  sv.scores.resize(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) sv.scores[i] = probs(i, model.num_known_classes);
  return sv;
}

inline ScoreVector score_max_softmax(const MlpModel& model, const Matrix& x) {
  detail::check_input(model, x, "score_max_softmax");
  const Matrix probs =
      softmax(detail::known_logits(model, forward(model.params, x).logits));
  ScoreVector sv;
  sv.spec.kind = DetectorKind::max_softmax;
  sv.scores = detail::one_minus_rowmax(probs);
  return sv;
}

// Shannon entropy of the known-class distribution, in nats. Already oriented
// (uncertain = high), so no negation.
inline ScoreVector score_entropy(const MlpModel& model, const Matrix& x) {
  detail::check_input(model, x, "score_entropy");
  const Matrix probs =
      softmax(detail::known_logits(model, forward(model.params, x).logits));
  ScoreVector sv;
  sv.spec.kind = DetectorKind::entropy;
  sv.scores.assign(x.rows, 0.0);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const double* row = probs.row_ptr(i);
    double h = 0.0;
    for (std::size_t j = 0; j < probs.cols; ++j)
      if (row[j] > 0.0) h -= row[j] * std::log(row[j]);
    sv.scores[i] = h;
  }
  return sv;
}

inline ScoreVector score_temp_softmax(const MlpModel& model, const Matrix& x, double temperature) {
  detail::check_input(model, x, "score_temp_softmax");
  if (!(temperature > 0.0)) throw DomainError("score_temp_softmax: temperature must be > 0");
  const Matrix probs =
      softmax(detail::known_logits(model, forward(model.params, x).logits), temperature);
  ScoreVector sv;
  sv.spec.kind = DetectorKind::temp_softmax;
  sv.spec.temperature = temperature;
  sv.scores = detail::one_minus_rowmax(probs);
  return sv;
}

// ODIN: nudge each input by -epsilon * sign of the gradient of the
// temperature-scaled CE at the predicted class (a step that raises
// confidence), then read 1 - max softmax(logits / T) at the nudged point.
// With epsilon = 0 and T = 1 this reduces exactly to max_softmax. `clip`
// bounds the nudged inputs to a valid feature range when one exists.
inline ScoreVector score_odin(const MlpModel& model, const Matrix& x, double temperature,
                              double epsilon,
                              std::optional<std::array<double, 2>> clip = std::nullopt) {
  detail::check_input(model, x, "score_odin");
  if (!(temperature > 0.0)) throw DomainError("score_odin: temperature must be > 0");
  if (!(epsilon >= 0.0)) throw DomainError("score_odin: epsilon must be >= 0");

  const ForwardTrace trace = forward(model.params, x);
  const std::size_t k = model.num_known_classes;
  const Matrix scaled = softmax(detail::known_logits(model, trace.logits), temperature);

  // Per-sample CE gradient at the predicted class; the abstention column (if
  // any) does not participate.
  Matrix dlogits(x.rows, model.output_width());
  for (std::size_t i = 0; i < x.rows; ++i) {
    const std::size_t pred = argmax_row(scaled, i);
    const double* p = scaled.row_ptr(i);
    double* g = dlogits.row_ptr(i);
    for (std::size_t j = 0; j < k; ++j) g[j] = p[j] / temperature;
    g[pred] -= 1.0 / temperature;
  }
  const Matrix d_input = backward_from_dlogits(model.params, trace, dlogits).d_input;

  Matrix nudged = x;
  for (std::size_t idx = 0; idx < nudged.values.size(); ++idx) {
    const double g = d_input.values[idx];
    const double step = g > 0.0 ? epsilon : (g < 0.0 ? -epsilon : 0.0);
    double v = nudged.values[idx] - step;
    if (clip) v = std::clamp(v, (*clip)[0], (*clip)[1]);
    nudged.values[idx] = v;
  }

  const Matrix probs =
      softmax(detail::known_logits(model, forward(model.params, nudged).logits), temperature);
  ScoreVector sv;
  sv.spec.kind = DetectorKind::odin;
  sv.spec.temperature = temperature;
  sv.spec.epsilon = epsilon;
  sv.scores = detail::one_minus_rowmax(probs);
  return sv;
}

// ---------------------------------------------------------------------------
// Mahalanobis distance in penultimate-feature space
// ---------------------------------------------------------------------------

inline constexpr double kMahalanobisRidge = 1e-4;

struct MahalanobisStats {
  Matrix class_means;  // K x d
  Matrix cov_inv;      // d x d, inverse of ridge-regularized pooled covariance
  double ridge = kMahalanobisRidge;
};

namespace detail {

// Lower-triangular Cholesky factor; throws if the matrix is not positive
// definite.
inline Matrix cholesky(const Matrix& a) {
  if (a.rows != a.cols) throw ShapeError("cholesky: matrix must be square");
  const std::size_t n = a.rows;
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(s > 0.0))
          throw NumericError("cholesky: matrix not positive definite at pivot " + std::to_string(i));
        l(i, j) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

// Inverse of a symmetric positive-definite matrix via its Cholesky factor:
// invert L by forward substitution, then A^-1 = L^-T L^-1.
inline Matrix spd_inverse(const Matrix& a) {
  const Matrix l = cholesky(a);
  const std::size_t n = a.rows;
  Matrix linv(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    linv(c, c) = 1.0 / l(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      double s = 0.0;
      for (std::size_t k = c; k < r; ++k) s += l(r, k) * linv(k, c);
      linv(r, c) = -s / l(r, r);
    }
  }
  Matrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = std::max(i, j); k < n; ++k) s += linv(k, i) * linv(k, j);
      inv(i, j) = s;
      inv(j, i) = s;
    }
  return inv;
}

}  // namespace detail

// Class-conditional Gaussian fit in penultimate-feature space: per-class
// means, one pooled covariance with a small ridge for invertibility.
inline MahalanobisStats fit_mahalanobis(const MlpModel& model, const Dataset& d_in,
                                        double ridge = kMahalanobisRidge) {
  if (model.params.num_hidden_layers() == 0)
    throw UnsupportedError("fit_mahalanobis: model has no hidden layer");
  if (d_in.num_known_classes != model.num_known_classes)
    throw SpecError("fit_mahalanobis: dataset classes " + std::to_string(d_in.num_known_classes) +
                    " do not match model classes " + std::to_string(model.num_known_classes));
  detail::check_input(model, d_in.X, "fit_mahalanobis");
  if (!(ridge > 0.0)) throw DomainError("fit_mahalanobis: ridge must be > 0");
  const std::size_t k = model.num_known_classes;

  std::vector<std::size_t> counts(k, 0);
  for (std::size_t y : d_in.y) {
    if (y >= k) throw SpecError("fit_mahalanobis: abstention-labeled sample in fit data");
    ++counts[y];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] < 2)
      throw SpecError("fit_mahalanobis: class " + std::to_string(c) + " has " +
                      std::to_string(counts[c]) + " samples, need at least 2");

  const Matrix phi = penultimate_features(forward(model.params, d_in.X));
  const std::size_t d = phi.cols;

  MahalanobisStats stats;
  stats.ridge = ridge;
  stats.class_means = Matrix(k, d);
  for (std::size_t i = 0; i < phi.rows; ++i) {
    const double* row = phi.row_ptr(i);
    double* mu = stats.class_means.row_ptr(d_in.y[i]);
    for (std::size_t j = 0; j < d; ++j) mu[j] += row[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    double* mu = stats.class_means.row_ptr(c);
    for (std::size_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(counts[c]);
  }

  Matrix cov(d, d);
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < phi.rows; ++i) {
    const double* row = phi.row_ptr(i);
    const double* mu = stats.class_means.row_ptr(d_in.y[i]);
    for (std::size_t j = 0; j < d; ++j) diff[j] = row[j] - mu[j];
    for (std::size_t a = 0; a < d; ++a) {
      const double da = diff[a];
      double* cov_row = cov.row_ptr(a);
      for (std::size_t b = a; b < d; ++b) cov_row[b] += da * diff[b];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(phi.rows);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) *= inv_n;
      cov(b, a) = cov(a, b);
    }
  for (std::size_t a = 0; a < d; ++a) cov(a, a) += ridge;

  stats.cov_inv = detail::spd_inverse(cov);
  return stats;
}

// Score = min over classes of the squared Mahalanobis distance to that class
// mean. Naturally oriented: far from every class = high.
inline ScoreVector score_mahalanobis(const MlpModel& model, const MahalanobisStats& stats,
                                     const Matrix& x) {
  detail::check_input(model, x, "score_mahalanobis");
  const Matrix phi = penultimate_features(forward(model.params, x));
  const std::size_t d = stats.cov_inv.rows;
  if (phi.cols != d || stats.class_means.cols != d)
    throw ShapeError("score_mahalanobis: stats fitted for feature dim " + std::to_string(d) +
                     ", model produces " + std::to_string(phi.cols));

  ScoreVector sv;
  sv.spec.kind = DetectorKind::mahalanobis;
  sv.scores.resize(x.rows);
  std::vector<double> diff(d), tmp(d);
  for (std::size_t i = 0; i < phi.rows; ++i) {
    const double* row = phi.row_ptr(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < stats.class_means.rows; ++c) {
      const double* mu = stats.class_means.row_ptr(c);
      for (std::size_t j = 0; j < d; ++j) diff[j] = row[j] - mu[j];
      double q = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        const double* inv_row = stats.cov_inv.row_ptr(a);
        double s = 0.0;
        for (std::size_t b = 0; b < d; ++b) s += inv_row[b] * diff[b];
        q += diff[a] * s;
      }
      best = std::min(best, q);
    }
    sv.scores[i] = best;
  }
  return sv;
}

// MC dropout: average the known-class softmax over n_passes stochastic
// forwards, score 1 - max of the averaged distribution. Each sample rolls its
// dropout masks from derive_seed(seed, row, pass), so scores do not depend on
// batch composition or order.
inline ScoreVector score_mc_dropout(const MlpModel& model, const Matrix& x, double dropout_p,
                                    std::size_t n_passes, std::uint64_t seed) {
  detail::check_input(model, x, "score_mc_dropout");
  if (n_passes < 1) throw DomainError("score_mc_dropout: n_passes must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0))
    throw DomainError("score_mc_dropout: dropout_p must be in [0,1)");
  if (dropout_p > 0.0 && model.dropout_p == 0.0)
    std::cerr << "[oodkit] warning: mc_dropout on a model trained without dropout\n";

  const std::size_t k = model.num_known_classes;
  ScoreVector sv;
  sv.spec.kind = DetectorKind::mc_dropout;
  sv.spec.dropout_p = dropout_p;
  sv.spec.n_passes = n_passes;
  sv.scores.resize(x.rows);

  Matrix row_mat(1, x.cols);
  std::vector<double> mean_probs(k);
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::copy_n(x.row_ptr(i), x.cols, row_mat.row_ptr(0));
    std::fill(mean_probs.begin(), mean_probs.end(), 0.0);
    for (std::size_t pass = 0; pass < n_passes; ++pass) {
      std::optional<double> p =
          dropout_p > 0.0 ? std::optional<double>(dropout_p) : std::nullopt;
      const Matrix logits = forward(model.params, row_mat, p, derive_seed(seed, i, pass)).logits;
      const Matrix probs = softmax(detail::known_logits(model, logits));
      for (std::size_t j = 0; j < k; ++j) mean_probs[j] += probs(0, j);
    }
    double max_p = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      max_p = std::max(max_p, mean_probs[j] / static_cast<double>(n_passes));
    sv.scores[i] = 1.0 - max_p;
  }
  return sv;
}

// Deep-ensemble disagreement: mean known-class softmax across members,
// scored as 1 - max.
inline ScoreVector score_ensemble(const std::vector<MlpModel>& members, const Matrix& x) {
  if (members.size() < 2) throw SpecError("score_ensemble: need at least 2 members");
  const MlpModel& first = members.front();
  for (const MlpModel& m : members)
    if (m.input_dim() != first.input_dim() || m.num_known_classes != first.num_known_classes ||
        m.has_abstention != first.has_abstention)
      throw ShapeError("score_ensemble: heterogeneous ensemble members");
  detail::check_input(first, x, "score_ensemble");

  const std::size_t k = first.num_known_classes;
  Matrix mean_probs(x.rows, k);
  for (const MlpModel& m : members) {
    const Matrix probs = softmax(detail::known_logits(m, forward(m.params, x).logits));
    for (std::size_t idx = 0; idx < mean_probs.values.size(); ++idx)
      mean_probs.values[idx] += probs.values[idx];
  }
  const double inv_m = 1.0 / static_cast<double>(members.size());
  for (double& v : mean_probs.values) v *= inv_m;

  ScoreVector sv;
  sv.spec.kind = DetectorKind::ensemble;
  sv.spec.n_members = members.size();
  sv.scores = detail::one_minus_rowmax(mean_probs);
  return sv;
}

}  // namespace oodkit
