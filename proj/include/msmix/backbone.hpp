// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "msmix/modality.hpp"
#include "msmix/rng.hpp"

namespace msmix {

struct BackboneDims {
  PerModality<std::size_t> raw{16, 16, 16};
  PerModality<std::size_t> latent{8, 8, 8};
  std::size_t hidden = 16;

  std::size_t fused() const noexcept { return latent[0] + latent[1] + latent[2]; }
  friend bool operator==(const BackboneDims &, const BackboneDims &) = default;
};

/// Toy multimodal regressor: tanh encoder per modality, concatenation fusion
/// through one tanh hidden layer, scalar affine head.
struct BackboneParams {
  BackboneDims dims;
  PerModality<Matrix> encoder_weight; // raw^m x d^m
  PerModality<Matrix> encoder_bias;   // 1 x d^m
  Matrix fusion_weight;               // (d^t + d^v + d^a) x hidden
  Matrix fusion_bias;                 // 1 x hidden
  Matrix head_weight;                 // hidden x 1
  Matrix head_bias;                   // 1 x 1

  static BackboneParams zeros(const BackboneDims &dims) {
    BackboneParams p;
    p.dims = dims;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      p.encoder_weight[m] = Matrix(dims.raw[m], dims.latent[m]);
      p.encoder_bias[m] = Matrix(1, dims.latent[m]);
    }
    p.fusion_weight = Matrix(dims.fused(), dims.hidden);
    p.fusion_bias = Matrix(1, dims.hidden);
    p.head_weight = Matrix(dims.hidden, 1);
    p.head_bias = Matrix(1, 1);
    return p;
  }

  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static BackboneParams init(const BackboneDims &dims, Rng &rng) {
    BackboneParams p = zeros(dims);
    auto fill = [&rng](Matrix &w) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows()));
      for (double &x : w.values())
        x = rng.uniform(-bound, bound);
    };
    for (auto &w : p.encoder_weight)
      fill(w);
    fill(p.fusion_weight);
    fill(p.head_weight);
    return p;
  }

  template <class F> void for_each_tensor(F &&f) {
    for (Modality m : kModalities) {
      const auto k = static_cast<std::size_t>(m);
      const std::string key(modality_key(m));
      f("encoder_weight_" + key, encoder_weight[k]);
      f("encoder_bias_" + key, encoder_bias[k]);
    }
    f("fusion_weight", fusion_weight);
    f("fusion_bias", fusion_bias);
    f("head_weight", head_weight);
    f("head_bias", head_bias);
  }
  template <class F> void for_each_tensor(F &&f) const {
    const_cast<BackboneParams *>(this)->for_each_tensor(
        [&](const std::string &name, Matrix &m) { f(name, static_cast<const Matrix &>(m)); });
  }
};

/// Z^m = tanh(X^m W^m + b^m).
inline FullBatch encode(const BackboneParams &p, const PerModality<Matrix> &raw) {
  PerModality<Matrix> z;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    if (raw[m].cols() != p.dims.raw[m])
      throw DimensionError("encode: modality " + std::string(modality_key(kModalities[m])) +
                           " has " + std::to_string(raw[m].cols()) + " raw features, expected " +
                           std::to_string(p.dims.raw[m]));
    z[m] = tanh_elementwise(add_row_bias(matmul(raw[m], p.encoder_weight[m]), p.encoder_bias[m].row(0)));
  }
  FullBatch batch = make_full_batch(std::move(z));
  checked_batch_size(batch);
  return batch;
}

struct FusionTrace {
  Matrix fused;  // concat(Z^t, Z^v, Z^a)
  Matrix hidden; // tanh(fused W + b)
  Vector predictions;
};

inline FusionTrace fuse_predict_trace(const BackboneParams &p, const PerModality<Matrix> &latent) {
  for (std::size_t m = 0; m < kNumModalities; ++m)
    if (latent[m].cols() != p.dims.latent[m])
      throw DimensionError("fuse_predict: latent dim mismatch for modality " +
                           std::string(modality_key(kModalities[m])));
  FusionTrace t;
  t.fused = hconcat(latent);
  t.hidden = tanh_elementwise(add_row_bias(matmul(t.fused, p.fusion_weight), p.fusion_bias.row(0)));
  const Matrix out = matmul(t.hidden, p.head_weight);
  t.predictions.resize(out.rows());
  for (std::size_t i = 0; i < out.rows(); ++i)
    t.predictions[i] = out(i, 0) + p.head_bias(0, 0);
  return t;
}

inline PerModality<Matrix> latent_features(const FullBatch &batch) {
  PerModality<Matrix> z;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    z[m] = batch[m].features;
  return z;
}

/// One scalar sentiment score per sample.
inline Vector fuse_predict(const BackboneParams &p, const FullBatch &batch) {
  checked_batch_size(batch);
  return fuse_predict_trace(p, latent_features(batch)).predictions;
}

inline Vector predict(const BackboneParams &p, const PerModality<Matrix> &raw) {
  return fuse_predict(p, encode(p, raw));
}

/// Backward through fusion and head. Accumulates into `grads` and returns dL/dZ^m.
inline PerModality<Matrix> fuse_predict_backward(const BackboneParams &p, const FusionTrace &t,
                                                 const Vector &grad_pred, BackboneParams &grads) {
  const std::size_t n = t.hidden.rows();
  Matrix grad_out(n, 1);
  double grad_head_bias = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    grad_out(i, 0) = grad_pred[i];
    grad_head_bias += grad_pred[i];
  }
  grads.head_bias(0, 0) += grad_head_bias;
  grads.head_weight += matmul(transpose(t.hidden), grad_out);
  Matrix grad_hidden = matmul(grad_out, transpose(p.head_weight));
  for (std::size_t k = 0; k < grad_hidden.size(); ++k) {
    const double h = t.hidden.values()[k];
    grad_hidden.values()[k] *= 1.0 - h * h;
  }
  grads.fusion_weight += matmul(transpose(t.fused), grad_hidden);
  grads.fusion_bias += Matrix::row_vector(column_sums(grad_hidden));
  const Matrix grad_fused = matmul(grad_hidden, transpose(p.fusion_weight));
  PerModality<Matrix> out;
  std::size_t offset = 0;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    out[m] = column_block(grad_fused, offset, p.dims.latent[m]);
    offset += p.dims.latent[m];
  }
  return out;
}

/// Backward through the tanh encoders given dL/dZ^m and the forward outputs Z^m.
inline void encode_backward(const PerModality<Matrix> &raw, const FullBatch &latent,
                            const PerModality<Matrix> &grad_latent, BackboneParams &grads) {
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    Matrix pre = grad_latent[m];
    const Matrix &z = latent[m].features;
    for (std::size_t k = 0; k < pre.size(); ++k)
      pre.values()[k] *= 1.0 - z.values()[k] * z.values()[k];
    grads.encoder_weight[m] += matmul(transpose(raw[m]), pre);
    grads.encoder_bias[m] += Matrix::row_vector(column_sums(pre));
  }
}

} // namespace msmix
