#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oodkit/common.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/rng.hpp"

namespace oodkit {

// Feed-forward network parameters: rectifier on hidden layers, identity on
// the output layer. layer_dims = [d_in, h_1, ..., h_L, d_out]; weights[i] is
// layer_dims[i] x layer_dims[i+1].
struct MlpParams {
  std::vector<std::size_t> layer_dims;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  std::size_t num_weight_layers() const { return weights.size(); }
  std::size_t num_hidden_layers() const {
    return weights.empty() ? 0 : weights.size() - 1;
  }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }

  void validate() const {
    if (layer_dims.size() < 2) throw ShapeError("params: need at least [d_in, d_out]");
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
      throw ShapeError("params: weight/bias count does not match layer_dims");
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i].rows != layer_dims[i] || weights[i].cols != layer_dims[i + 1])
        throw ShapeError("layer " + std::to_string(i) + ": weight shape " +
                         shape_str(weights[i]) + " does not match dims " +
                         std::to_string(layer_dims[i]) + "x" + std::to_string(layer_dims[i + 1]));
      if (biases[i].size() != layer_dims[i + 1])
        throw ShapeError("layer " + std::to_string(i) + ": bias length " +
                         std::to_string(biases[i].size()) + " != " +
                         std::to_string(layer_dims[i + 1]));
    }
  }
};

// Everything forward() computed, kept for the exact backward pass.
// Dropout masks store 0 or 1/(1-p) per hidden unit; absent when dropout off.
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre_hidden;    // z per hidden layer
  std::vector<Matrix> post_hidden;   // mask .* relu(z) per hidden layer
  std::vector<Matrix> dropout_masks; // empty when dropout off
  Matrix logits;                     // batch x d_out

  bool dropout_active() const { return !dropout_masks.empty(); }
};

// Shapes mirror MlpParams exactly; d_input is the gradient w.r.t. the batch.
struct Gradients {
  std::vector<Matrix> d_weights;
  std::vector<std::vector<double>> d_biases;
  Matrix d_input;
};

inline ForwardTrace forward(const MlpParams& params, const Matrix& batch,
                            std::optional<double> dropout_p = std::nullopt,
                            std::uint64_t rng_seed = 0) {
  params.validate();
  if (batch.cols != params.input_dim())
    throw ShapeError("layer 0: input width " + std::to_string(batch.cols) +
                     " != d_in " + std::to_string(params.input_dim()));
  if (dropout_p && (*dropout_p < 0.0 || *dropout_p >= 1.0))
    throw DomainError("dropout_p must be in [0,1), got " + std::to_string(*dropout_p));
  const bool use_dropout = dropout_p && *dropout_p > 0.0;

  ForwardTrace trace;
  trace.input = batch;
  const std::size_t num_hidden = params.num_hidden_layers();
  trace.pre_hidden.reserve(num_hidden);
  trace.post_hidden.reserve(num_hidden);

  RngEngine eng(rng_seed);
  const Matrix* act = &trace.input;
  for (std::size_t i = 0; i < num_hidden; ++i) {
    Matrix z = matmul(*act, params.weights[i]);
    add_row_vector(z, params.biases[i]);
    Matrix a = z;
    for (double& v : a.values) v = v > 0.0 ? v : 0.0;
    if (use_dropout) {
      const double keep_scale = 1.0 / (1.0 - *dropout_p);
      Matrix mask(a.rows, a.cols);
      for (std::size_t k = 0; k < mask.values.size(); ++k)
        mask.values[k] = (uniform01(eng) < *dropout_p) ? 0.0 : keep_scale;
      for (std::size_t k = 0; k < a.values.size(); ++k) a.values[k] *= mask.values[k];
      trace.dropout_masks.push_back(std::move(mask));
    }
    trace.pre_hidden.push_back(std::move(z));
    trace.post_hidden.push_back(std::move(a));
    act = &trace.post_hidden.back();
  }

  trace.logits = matmul(*act, params.weights.back());
  add_row_vector(trace.logits, params.biases.back());
  if (!trace.logits.all_finite())
    throw NumericError("forward produced non-finite logits");
  return trace;
}

// Row-wise softmax of logits/T, max-shifted for stability. Rows sum to 1.
inline Matrix softmax(const Matrix& logits, double temperature = 1.0) {
  if (!(temperature > 0.0))
    throw DomainError("softmax temperature must be > 0, got " + std::to_string(temperature));
  Matrix probs(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* z = logits.row_ptr(i);
    double* p = probs.row_ptr(i);
    double mx = z[0];
    for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      p[j] = std::exp((z[j] - mx) / temperature);
      sum += p[j];
    }
    for (std::size_t j = 0; j < logits.cols; ++j) p[j] /= sum;
  }
  return probs;
}

inline constexpr double kLogClamp = 1e-12;

// Mean negative log-likelihood; log argument clamped at 1e-12.
inline double cross_entropy(const Matrix& probs, const std::vector<std::size_t>& labels) {
  if (labels.size() != probs.rows)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(probs.rows) + " rows");
  if (probs.rows == 0) throw ShapeError("cross_entropy: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    if (labels[i] >= probs.cols)
      throw IndexError("cross_entropy: label " + std::to_string(labels[i]) +
                       " out of range for " + std::to_string(probs.cols) + " classes (row " +
                       std::to_string(i) + ")");
    total += -std::log(std::max(probs(i, labels[i]), kLogClamp));
  }
  return total / static_cast<double>(probs.rows);
}

// Backpropagates an arbitrary d(loss)/d(logits) through the trace. Dropout
// masks recorded in the trace are replayed exactly. Training loops pass
// want_input_grad = false to skip the first-layer input gradient.
inline Gradients backward_from_dlogits(const MlpParams& params, const ForwardTrace& trace,
                                       const Matrix& dlogits, bool want_input_grad = true) {
  params.validate();
  const std::size_t num_hidden = params.num_hidden_layers();
  if (trace.pre_hidden.size() != num_hidden || trace.post_hidden.size() != num_hidden)
    throw ShapeError("backward: trace does not match params (hidden layer count)");
  if (dlogits.rows != trace.input.rows || dlogits.cols != params.output_dim())
    throw ShapeError("backward: dlogits shape " + shape_str(dlogits) + " != batch x d_out");
  if (trace.dropout_active() && trace.dropout_masks.size() != num_hidden)
    throw ShapeError("backward: dropout mask count does not match hidden layers");

  Gradients g;
  g.d_weights.resize(params.num_weight_layers());
  g.d_biases.resize(params.num_weight_layers());

  const Matrix& last_act = num_hidden ? trace.post_hidden.back() : trace.input;
  g.d_weights.back() = matmul_tn(last_act, dlogits);
  g.d_biases.back() = column_sums(dlogits);

  Matrix delta;  // grad w.r.t. last post-activation
  if (num_hidden > 0 || want_input_grad) delta = matmul_nt(dlogits, params.weights.back());
  for (std::size_t li = num_hidden; li-- > 0;) {
    // a = mask .* relu(z)  =>  dz = da .* mask .* 1[z > 0]
    const Matrix& z = trace.pre_hidden[li];
    if (!delta.same_shape(z))
      throw ShapeError("backward: layer " + std::to_string(li) + " trace shape mismatch");
    if (trace.dropout_active()) {
      const Matrix& mask = trace.dropout_masks[li];
      for (std::size_t k = 0; k < delta.values.size(); ++k) delta.values[k] *= mask.values[k];
    }
    for (std::size_t k = 0; k < delta.values.size(); ++k)
      if (z.values[k] <= 0.0) delta.values[k] = 0.0;

    const Matrix& prev_act = li ? trace.post_hidden[li - 1] : trace.input;
    g.d_weights[li] = matmul_tn(prev_act, delta);
    g.d_biases[li] = column_sums(delta);
    if (li > 0 || want_input_grad)
      delta = matmul_nt(delta, params.weights[li]);
  }
  if (want_input_grad) g.d_input = std::move(delta);

  for (const Matrix& dw : g.d_weights)
    if (!dw.all_finite()) throw NumericError("backward produced non-finite gradients");
  if (!g.d_input.all_finite()) throw NumericError("backward produced non-finite input gradient");
  return g;
}

// Exact gradient of mean cross-entropy(softmax(logits), labels) w.r.t. all
// parameters and the input batch.
inline Gradients backward(const MlpParams& params, const ForwardTrace& trace,
                          const std::vector<std::size_t>& labels) {
  if (labels.size() != trace.input.rows)
    throw ShapeError("backward: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(trace.input.rows));
  const std::size_t n = trace.input.rows;
  Matrix dlogits = softmax(trace.logits, 1.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= dlogits.cols)
      throw IndexError("backward: label " + std::to_string(labels[i]) + " out of range");
    dlogits(i, labels[i]) -= 1.0;
    double* row = dlogits.row_ptr(i);
    for (std::size_t j = 0; j < dlogits.cols; ++j) row[j] *= inv_n;
  }
  return backward_from_dlogits(params, trace, dlogits);
}

// Post-activation values of the last hidden layer.
inline Matrix penultimate_features(const ForwardTrace& trace) {
  if (trace.post_hidden.empty())
    throw UnsupportedError("penultimate_features: network has no hidden layer");
  return trace.post_hidden.back();
}

}  // namespace oodkit
