#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oodkit/common.hpp"
#include "oodkit/data.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/nn.hpp"
#include "oodkit/rng.hpp"

namespace oodkit {

struct TrainConfig {
  std::vector<std::size_t> hidden_dims{32};
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  double weight_decay = 0.0;
  std::optional<double> dropout_p;
  double oe_lambda = 0.5;  // weight of the uniform-target term, train_oe only
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (dropout_p && !(*dropout_p >= 0.0 && *dropout_p < 1.0))
      throw ConfigError("dropout_p must be in [0,1)");
    if (!(oe_lambda > 0.0)) throw ConfigError("oe_lambda must be > 0");
  }
};

// A trained network plus the bookkeeping detectors need: how many known
// classes, whether the last output column is the abstention class, the
// calibration temperature, and the dropout rate it was trained with.
struct MlpModel {
  MlpParams params;
  std::size_t num_known_classes = 0;
  bool has_abstention = false;
  double temperature = 1.0;
  double dropout_p = 0.0;

  std::size_t input_dim() const { return params.layer_dims.front(); }
  std::size_t output_width() const { return params.layer_dims.back(); }
};

struct TrainLog {
  std::vector<double> epoch_loss;          // objective mean per epoch
  std::vector<double> epoch_val_accuracy;  // ID accuracy on the held-out slice
};

inline MlpParams init_params(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
  MlpParams p;
  p.layer_dims = layer_dims;
  RngEngine eng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l];
    const std::size_t fan_out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (double& v : w.values) v = uniform_range(eng, -limit, limit);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::vector<double>(fan_out, 0.0));
  }
  p.validate();
  return p;
}

// Classification decision: argmax over the known classes. The abstention
// column (when present) is the detection channel, thresholded by detect();
// it never takes part in the class decision, mirroring how abstention-model
// confidence scores renormalize over the known columns only.
inline std::vector<std::size_t> predict_classes(const MlpModel& model, const Matrix& x) {
  const Matrix logits = forward(model.params, x).logits;
  const std::size_t limit = model.has_abstention ? model.num_known_classes : 0;
  std::vector<std::size_t> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = argmax_row(logits, i, limit);
  return out;
}

// Fraction of samples whose predicted class matches the label.
inline double id_accuracy(const MlpModel& model, const Dataset& d) {
  if (d.dim() != model.input_dim())
    throw ShapeError("id_accuracy: dataset width " + std::to_string(d.dim()) +
                     " does not match model input " + std::to_string(model.input_dim()));
  const std::vector<std::size_t> pred = predict_classes(model, d.X);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (pred[i] == d.y[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

namespace detail {

// One training row: features live in the batch matrix; the target is either
// a class label (CE against one-hot) or the uniform distribution (OE term).
struct TargetRow {
  std::size_t label = 0;
  bool uniform = false;
};

constexpr double kValFraction = 0.1;
constexpr std::uint64_t kValSplitTag = 0x76616c5f;  // seed-derivation tag

struct TrainData {
  Matrix x;
  std::vector<TargetRow> targets;
};

// Mixed-objective batch gradient. CE rows contribute (softmax - onehot)/n_ce,
// uniform rows contribute lambda*(softmax - 1/W)/n_unif where W is the output
// width. Each term is normalized by its own row count so the batch gradient
// matches the two-term objective mean for mean.
inline double batch_dlogits(const Matrix& logits, const std::vector<TargetRow>& targets,
                            double lambda, Matrix* dlogits, double* ce_sum, double* unif_sum,
                            std::size_t* ce_rows, std::size_t* unif_rows) {
  const std::size_t n = logits.rows, w = logits.cols;
  std::size_t n_ce = 0, n_unif = 0;
  for (const TargetRow& t : targets) (t.uniform ? n_unif : n_ce)++;
  *dlogits = Matrix(n, w);
  double ce_total = 0.0, unif_total = 0.0;
  const Matrix probs = softmax(logits);
  const double inv_w = 1.0 / static_cast<double>(w);
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = probs.row_ptr(i);
    double* g = dlogits->row_ptr(i);
    if (targets[i].uniform) {
      const double scale = lambda / static_cast<double>(n_unif);
      double row_loss = 0.0;
      for (std::size_t j = 0; j < w; ++j) {
        g[j] = scale * (p[j] - inv_w);
        row_loss -= inv_w * std::log(std::max(p[j], kLogClamp));
      }
      unif_total += row_loss;
    } else {
      const double scale = 1.0 / static_cast<double>(n_ce);
      const std::size_t y = targets[i].label;
      if (y >= w) throw IndexError("train: label " + std::to_string(y) + " out of range");
      for (std::size_t j = 0; j < w; ++j) g[j] = scale * p[j];
      g[y] -= scale;
      ce_total -= std::log(std::max(p[y], kLogClamp));
    }
  }
  *ce_sum += ce_total;
  *unif_sum += unif_total;
  *ce_rows += n_ce;
  *unif_rows += n_unif;
  double batch_loss = 0.0;
  if (n_ce > 0) batch_loss += ce_total / static_cast<double>(n_ce);
  if (n_unif > 0) batch_loss += lambda * unif_total / static_cast<double>(n_unif);
  return batch_loss;
}

inline MlpModel train_core(const TrainData& data, std::size_t input_dim, std::size_t out_width,
                           std::size_t num_known, bool has_abstention, const Dataset& val,
                           const TrainConfig& cfg, TrainLog* log) {
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(out_width);

  MlpModel model;
  model.params = init_params(dims, cfg.seed);
  model.num_known_classes = num_known;
  model.has_abstention = has_abstention;
  model.dropout_p = cfg.dropout_p.value_or(0.0);

  const std::size_t n = data.x.rows;
  std::vector<Matrix> vel_w;
  std::vector<std::vector<double>> vel_b;
  for (std::size_t l = 0; l < model.params.weights.size(); ++l) {
    vel_w.emplace_back(model.params.weights[l].rows, model.params.weights[l].cols);
    vel_b.emplace_back(model.params.biases[l].size(), 0.0);
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(n, cfg.seed + epoch);
    double ce_sum = 0.0, unif_sum = 0.0;
    std::size_t ce_rows = 0, unif_rows = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t bsz = std::min(cfg.batch_size, n - start);
      Matrix xb(bsz, data.x.cols);
      std::vector<TargetRow> tb(bsz);
      for (std::size_t r = 0; r < bsz; ++r) {
        const std::size_t src = order[start + r];
        std::copy_n(data.x.row_ptr(src), data.x.cols, xb.row_ptr(r));
        tb[r] = data.targets[src];
      }
      const std::uint64_t drop_seed = derive_seed(cfg.seed, epoch, batch_index);
      Gradients g;
      double batch_loss = 0.0;
      try {
        const ForwardTrace trace = forward(model.params, xb, cfg.dropout_p, drop_seed);
        Matrix dlogits;
        batch_loss = batch_dlogits(trace.logits, tb, cfg.oe_lambda, &dlogits,
                                   &ce_sum, &unif_sum, &ce_rows, &unif_rows);
        g = backward_from_dlogits(model.params, trace, dlogits, /*want_input_grad=*/false);
      } catch (const NumericError& e) {
        throw TrainError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(batch_loss))
        throw TrainError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
      for (std::size_t l = 0; l < model.params.weights.size(); ++l) {
        Matrix& w = model.params.weights[l];
        Matrix& vw = vel_w[l];
        const Matrix& dw = g.d_weights[l];
        for (std::size_t k = 0; k < w.values.size(); ++k) {
          vw.values[k] = cfg.momentum * vw.values[k] -
                         cfg.learning_rate * (dw.values[k] + cfg.weight_decay * w.values[k]);
          w.values[k] += vw.values[k];
        }
        std::vector<double>& b = model.params.biases[l];
        std::vector<double>& vb = vel_b[l];
        const std::vector<double>& db = g.d_biases[l];
        for (std::size_t k = 0; k < b.size(); ++k) {
          vb[k] = cfg.momentum * vb[k] - cfg.learning_rate * db[k];
          b[k] += vb[k];
        }
      }
    }
    if (log) {
      double epoch_loss = 0.0;
      if (ce_rows > 0) epoch_loss += ce_sum / static_cast<double>(ce_rows);
      if (unif_rows > 0) epoch_loss += cfg.oe_lambda * unif_sum / static_cast<double>(unif_rows);
      log->epoch_loss.push_back(epoch_loss);
      log->epoch_val_accuracy.push_back(id_accuracy(model, val));
    }
  }
  return model;
}

// Deterministic 90/10 carve of the ID data; the slice feeds the per-epoch
// validation accuracy in TrainLog. With a single sample both sides see it.
inline std::pair<Dataset, Dataset> carve_val(const Dataset& d_in, std::uint64_t seed) {
  const std::size_t n = d_in.size();
  std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                   static_cast<double>(n) * kValFraction));
  if (n_val >= n) return {d_in, d_in};
  const std::vector<std::size_t> order = shuffled_indices(n, derive_seed(seed, kValSplitTag));
  Dataset fit = take_rows(d_in, std::vector<std::size_t>(order.begin(), order.end() - n_val));
  Dataset val = take_rows(d_in, std::vector<std::size_t>(order.end() - n_val, order.end()));
  return {fit, val};
}

inline void check_id_labels(const Dataset& d_in, const char* who) {
  if (d_in.num_known_classes < 1)
    throw SpecError(std::string(who) + ": in-distribution data must carry class labels");
  for (std::size_t y : d_in.y)
    if (y >= d_in.num_known_classes)
      throw SpecError(std::string(who) + ": label " + std::to_string(y) +
                      " >= num_known_classes " + std::to_string(d_in.num_known_classes));
}

}  // namespace detail

// Abstention-class training: the network gets K+1 outputs and every
// outlier-exposure sample is labeled with the extra class K. Plain CE.
inline MlpModel train_dac(const Dataset& d_in, const Dataset& d_out_tilde, const TrainConfig& cfg,
                          TrainLog* log = nullptr) {
  cfg.validate();
  detail::check_id_labels(d_in, "train_dac");
  if (d_out_tilde.size() == 0) throw SpecError("train_dac: outlier-exposure set is empty");
  if (d_in.dim() != d_out_tilde.dim())
    throw ShapeError("train_dac: feature width mismatch between d_in and d_out_tilde");
  const std::size_t k = d_in.num_known_classes;
  auto [fit, val] = detail::carve_val(d_in, cfg.seed);

  detail::TrainData data;
  data.x = Matrix(fit.size() + d_out_tilde.size(), d_in.dim());
  data.targets.resize(data.x.rows);
  for (std::size_t i = 0; i < fit.size(); ++i) {
    std::copy_n(fit.X.row_ptr(i), fit.dim(), data.x.row_ptr(i));
    data.targets[i] = {fit.y[i], false};
  }
  for (std::size_t i = 0; i < d_out_tilde.size(); ++i) {
    std::copy_n(d_out_tilde.X.row_ptr(i), d_out_tilde.dim(), data.x.row_ptr(fit.size() + i));
    data.targets[fit.size() + i] = {k, false};  // abstention label
  }
  return detail::train_core(data, d_in.dim(), k + 1, k, true, val, cfg, log);
}

// Standard K-way classifier on ID data only.
inline MlpModel train_plain(const Dataset& d_in, const TrainConfig& cfg, TrainLog* log = nullptr) {
  cfg.validate();
  detail::check_id_labels(d_in, "train_plain");
  auto [fit, val] = detail::carve_val(d_in, cfg.seed);
  detail::TrainData data;
  data.x = fit.X;
  data.targets.resize(fit.size());
  for (std::size_t i = 0; i < fit.size(); ++i) data.targets[i] = {fit.y[i], false};
  return detail::train_core(data, d_in.dim(), d_in.num_known_classes, d_in.num_known_classes,
                            false, val, cfg, log);
}

// Outlier exposure: K outputs; OE samples pull the softmax toward uniform
// with weight cfg.oe_lambda instead of getting their own class.
inline MlpModel train_oe(const Dataset& d_in, const Dataset& d_out_tilde, const TrainConfig& cfg,
                         TrainLog* log = nullptr) {
  cfg.validate();
  detail::check_id_labels(d_in, "train_oe");
  if (d_out_tilde.size() == 0) throw SpecError("train_oe: outlier-exposure set is empty");
  if (d_in.dim() != d_out_tilde.dim())
    throw ShapeError("train_oe: feature width mismatch between d_in and d_out_tilde");
  auto [fit, val] = detail::carve_val(d_in, cfg.seed);

  detail::TrainData data;
  data.x = Matrix(fit.size() + d_out_tilde.size(), d_in.dim());
  data.targets.resize(data.x.rows);
  for (std::size_t i = 0; i < fit.size(); ++i) {
    std::copy_n(fit.X.row_ptr(i), fit.dim(), data.x.row_ptr(i));
    data.targets[i] = {fit.y[i], false};
  }
  for (std::size_t i = 0; i < d_out_tilde.size(); ++i) {
    std::copy_n(d_out_tilde.X.row_ptr(i), d_out_tilde.dim(), data.x.row_ptr(fit.size() + i));
    data.targets[fit.size() + i] = {0, true};
  }
  return detail::train_core(data, d_in.dim(), d_in.num_known_classes, d_in.num_known_classes,
                            false, val, cfg, log);
}

// M independently initialized members; member i trains with seed
// cfg.seed + i so runs are reproducible yet diverse.
inline std::vector<MlpModel> train_ensemble(
    const std::function<MlpModel(const TrainConfig&)>& train_member, const TrainConfig& cfg,
    std::size_t n_members) {
  if (n_members < 2) throw SpecError("train_ensemble: need at least 2 members");
  std::vector<MlpModel> members;
  members.reserve(n_members);
  for (std::size_t i = 0; i < n_members; ++i) {
    TrainConfig member_cfg = cfg;
    member_cfg.seed = cfg.seed + i;
    members.push_back(train_member(member_cfg));
  }
  return members;
}

// Post-hoc temperature calibration: minimize NLL of softmax(logits / T) on
// held-out ID data over T in [0.05, 20] by golden-section search. The NLL is
// convex in 1/T, hence unimodal in T, so the search is exact up to the
// bracket tolerance. Only model.temperature changes; argmax is unaffected.
inline MlpModel fit_temperature(const MlpModel& model, const Dataset& val) {
  detail::check_id_labels(val, "fit_temperature");
  if (val.dim() != model.input_dim())
    throw ShapeError("fit_temperature: dataset width does not match model input");
  if (val.num_known_classes > model.output_width())
    throw SpecError("fit_temperature: more classes than model outputs");
  const Matrix logits = forward(model.params, val.X).logits;
  const auto nll = [&](double t) {
    return cross_entropy(softmax(logits, t), val.y);
  };
  double a = 0.05, b = 20.0;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = nll(c), fd = nll(d);
  while (b - a > 1e-8) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = nll(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = nll(d);
    }
  }
  MlpModel out = model;
  out.temperature = 0.5 * (a + b);
  return out;
}

}  // namespace oodkit
