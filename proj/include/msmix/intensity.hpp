// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "msmix/modality.hpp"
#include "msmix/rng.hpp"

namespace msmix {

/// Weights of one modality's emotional-intensity predictor: multi-head
/// self-attention over the batch rows, residual, layer norm, mean pool, tanh.
struct IntensityPredictorParams {
  std::size_t heads = 1;
  std::size_t key_dim = 1;
  std::vector<Matrix> query; // per head: d x key_dim
  std::vector<Matrix> key;
  std::vector<Matrix> value;
  Matrix output;  // (heads * key_dim) x d
  Matrix ln_gain; // 1 x d
  Matrix ln_bias; // 1 x d

  std::size_t dim() const noexcept { return ln_gain.cols(); }

  /// Zero-valued parameters with the given shapes (also used for gradients).
  static IntensityPredictorParams zeros(std::size_t dim, std::size_t heads) {
    if (dim == 0 || heads == 0)
      throw ValueError("intensity predictor needs dim > 0 and heads > 0");
    IntensityPredictorParams p;
    p.heads = heads;
    p.key_dim = std::max<std::size_t>(1, dim / heads);
    for (std::size_t h = 0; h < heads; ++h) {
      p.query.emplace_back(dim, p.key_dim);
      p.key.emplace_back(dim, p.key_dim);
      p.value.emplace_back(dim, p.key_dim);
    }
    p.output = Matrix(heads * p.key_dim, dim);
    p.ln_gain = Matrix(1, dim);
    p.ln_bias = Matrix(1, dim);
    return p;
  }

  /// Projections uniform in [-1/sqrt(d), 1/sqrt(d)]; layer norm starts as identity.
  static IntensityPredictorParams init(std::size_t dim, std::size_t heads, Rng &rng) {
    auto p = zeros(dim, heads);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Matrix *m : p.projection_tensors())
      for (double &x : m->values())
        x = rng.uniform(-bound, bound);
    for (double &g : p.ln_gain.values())
      g = 1.0;
    return p;
  }

  std::vector<Matrix *> projection_tensors() {
    std::vector<Matrix *> out;
    for (std::size_t h = 0; h < heads; ++h) {
      out.push_back(&query[h]);
      out.push_back(&key[h]);
      out.push_back(&value[h]);
    }
    out.push_back(&output);
    return out;
  }

  /// Every tensor with a stable name, in a fixed order.
  template <class F> void for_each_tensor(F &&f) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::string s = std::to_string(h);
      f("query" + s, query[h]);
      f("key" + s, key[h]);
      f("value" + s, value[h]);
    }
    f("output", output);
    f("ln_gain", ln_gain);
    f("ln_bias", ln_bias);
  }
  template <class F> void for_each_tensor(F &&f) const {
    const_cast<IntensityPredictorParams *>(this)->for_each_tensor(
        [&](const std::string &name, Matrix &m) { f(name, static_cast<const Matrix &>(m)); });
  }
};

/// Intermediate values of one predictor forward pass, kept for backprop.
struct IntensityTrace {
  Matrix input; // Z, B x d
  std::vector<Matrix> q, k, v, attn;
  Matrix concat;
  LayerNormResult norm;
  Vector intensities; // tanh(mean-pooled LN output), length B
};

inline IntensityTrace predict_intensity_trace(const IntensityPredictorParams &p, const Matrix &z) {
  if (z.cols() != p.dim())
    throw DimensionError("predict_intensity: feature dim " + std::to_string(z.cols()) +
                         " does not match predictor dim " + std::to_string(p.dim()));
  if (z.rows() == 0)
    throw DimensionError("predict_intensity: empty batch");
  IntensityTrace t;
  t.input = z;
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.key_dim));
  std::vector<Matrix> heads;
  for (std::size_t h = 0; h < p.heads; ++h) {
    t.q.push_back(matmul(z, p.query[h]));
    t.k.push_back(matmul(z, p.key[h]));
    t.v.push_back(matmul(z, p.value[h]));
    Matrix scores = matmul(t.q[h], transpose(t.k[h]));
    scores *= scale;
    t.attn.push_back(softmax_rows(scores));
    heads.push_back(matmul(t.attn[h], t.v[h]));
  }
  t.concat = hconcat(heads);
  Matrix residual = matmul(t.concat, p.output);
  residual += z;
  t.norm = layer_norm_forward(residual, p.ln_gain.row(0), p.ln_bias.row(0));
  t.intensities.resize(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double pooled = 0.0;
    for (double x : t.norm.output.row(i))
      pooled += x;
    pooled /= static_cast<double>(z.cols());
    t.intensities[i] = std::tanh(pooled);
  }
  return t;
}

/// Emotional intensity per sample, each strictly inside (-1, 1).
inline Vector predict_intensity(const IntensityPredictorParams &p, const ModalityBatch &batch) {
  return predict_intensity_trace(p, batch.features).intensities;
}

struct IntensityGrads {
  IntensityPredictorParams params;
  Matrix input;
};

/// Backward pass given dL/dI.
inline IntensityGrads predict_intensity_backward(const IntensityPredictorParams &p,
                                                 const IntensityTrace &t, const Vector &grad_i) {
  const std::size_t b = t.input.rows(), d = t.input.cols();
  IntensityGrads g{IntensityPredictorParams::zeros(d, p.heads), Matrix(b, d)};

  Matrix grad_norm(b, d);
  for (std::size_t i = 0; i < b; ++i) {
    const double ii = t.intensities[i];
    const double dpool = grad_i[i] * (1.0 - ii * ii) / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j)
      grad_norm(i, j) = dpool;
  }
  auto ln = layer_norm_backward(t.norm, p.ln_gain.row(0), grad_norm);
  g.params.ln_gain = Matrix::row_vector(ln.gain);
  g.params.ln_bias = Matrix::row_vector(ln.bias);
  const Matrix &grad_res = ln.input;
  g.input += grad_res;

  g.params.output = matmul(transpose(t.concat), grad_res);
  const Matrix grad_concat = matmul(grad_res, transpose(p.output));
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.key_dim));
  const Matrix zt = transpose(t.input);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Matrix grad_head = column_block(grad_concat, h * p.key_dim, p.key_dim);
    const Matrix grad_attn = matmul(grad_head, transpose(t.v[h]));
    const Matrix grad_v = matmul(transpose(t.attn[h]), grad_head);
    Matrix grad_scores = softmax_rows_backward(t.attn[h], grad_attn);
    grad_scores *= scale;
    const Matrix grad_q = matmul(grad_scores, t.k[h]);
    const Matrix grad_k = matmul(transpose(grad_scores), t.q[h]);
    g.params.query[h] = matmul(zt, grad_q);
    g.params.key[h] = matmul(zt, grad_k);
    g.params.value[h] = matmul(zt, grad_v);
    g.input += matmul(grad_q, transpose(p.query[h]));
    g.input += matmul(grad_k, transpose(p.key[h]));
    g.input += matmul(grad_v, transpose(p.value[h]));
  }
  return g;
}

} // namespace msmix
