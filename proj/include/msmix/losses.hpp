// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "msmix/matrix.hpp"
#include "msmix/modality.hpp"

namespace msmix {

struct LossWeights {
  double xi1 = 0.7;    // mixed-sample MSE
  double xi2 = 0.5;    // sentiment alignment
  double beta = 1000.0; // alignment scale
};

struct LossBreakdown {
  double task = 0.0;
  double mix_mse = 0.0;
  double sal = 0.0;
  double total = 0.0;
};

namespace detail {
inline void require_same_length(std::size_t a, std::size_t b, const char *what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
}
} // namespace detail

inline double task_mse(const Vector &predictions, const Vector &labels) {
  detail::require_same_length(predictions.size(), labels.size(), "task_mse");
  if (predictions.empty())
    throw DimensionError("task_mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    s += (predictions[i] - labels[i]) * (predictions[i] - labels[i]);
  return s / static_cast<double>(labels.size());
}

inline Vector task_mse_grad(const Vector &predictions, const Vector &labels) {
  Vector g(predictions.size());
  const double n = static_cast<double>(labels.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = 2.0 * (predictions[i] - labels[i]) / n;
  return g;
}

namespace detail {
inline void check_mix_inputs(const Vector &pred, const Vector &yi, const Vector &yj,
                             const Vector &lambda) {
  require_same_length(pred.size(), yi.size(), "mix_mse");
  require_same_length(pred.size(), yj.size(), "mix_mse");
  require_same_length(pred.size(), lambda.size(), "mix_mse");
  for (double l : lambda)
    if (!(l >= 0.0 && l <= 1.0))
      throw ValueError("mix_mse: label ratio outside [0, 1]");
}
} // namespace detail

/// Mean over pairs of λ (f(x̂) - y_i)² + (1 - λ)(f(x̂) - y_j)², one prediction per mixed sample.
inline double mix_mse(const Vector &pred, const Vector &yi, const Vector &yj, const Vector &lambda) {
  detail::check_mix_inputs(pred, yi, yj, lambda);
  if (pred.empty())
    return 0.0;
  double s = 0.0;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    const double di = pred[p] - yi[p], dj = pred[p] - yj[p];
    s += lambda[p] * di * di + (1.0 - lambda[p]) * dj * dj;
  }
  return s / static_cast<double>(pred.size());
}

struct MixMseGrads {
  Vector pred;
  Vector lambda;
};

inline MixMseGrads mix_mse_grad(const Vector &pred, const Vector &yi, const Vector &yj,
                                const Vector &lambda) {
  detail::check_mix_inputs(pred, yi, yj, lambda);
  MixMseGrads g{Vector(pred.size()), Vector(pred.size())};
  const double n = static_cast<double>(pred.size());
  for (std::size_t p = 0; p < pred.size(); ++p) {
    const double di = pred[p] - yi[p], dj = pred[p] - yj[p];
    g.pred[p] = 2.0 * (lambda[p] * di + (1.0 - lambda[p]) * dj) / n;
    g.lambda[p] = (di * di - dj * dj) / n;
  }
  return g;
}

/// Softmax across the batch dimension.
inline Vector batch_softmax(const Vector &values) {
  if (values.empty())
    throw DimensionError("batch_softmax: empty input");
  const Matrix p = softmax_rows(Matrix::row_vector(values));
  return p.values();
}

inline constexpr double kLogFloor = 1e-300;

/// (1/B) Σ_i P_i (log P_i − log Q_i), natural log, with the 1/B batch factor.
inline double kl_divergence(const Vector &target, const Vector &approx) {
  detail::require_same_length(target.size(), approx.size(), "kl_divergence");
  if (target.empty())
    throw DimensionError("kl_divergence: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i)
    s += target[i] * (std::log(std::max(target[i], kLogFloor)) - std::log(std::max(approx[i], kLogFloor)));
  return s / static_cast<double>(target.size());
}

/// β Σ_m KL(softmax(Y) ‖ softmax(I^m)).
inline double sal_loss(const PerModality<Vector> &intensities, const Vector &labels, double beta) {
  const Vector target = batch_softmax(labels);
  double s = 0.0;
  for (const auto &im : intensities) {
    detail::require_same_length(im.size(), labels.size(), "sal_loss");
    s += kl_divergence(target, batch_softmax(im));
  }
  return s * beta;
}

/// dSAL/dI^m per modality: β (softmax(I^m) − softmax(Y)) / B.
inline PerModality<Vector> sal_loss_grad(const PerModality<Vector> &intensities, const Vector &labels,
                                         double beta) {
  const Vector target = batch_softmax(labels);
  const double n = static_cast<double>(labels.size());
  PerModality<Vector> g;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    detail::require_same_length(intensities[m].size(), labels.size(), "sal_loss_grad");
    const Vector pm = batch_softmax(intensities[m]);
    g[m].resize(pm.size());
    for (std::size_t i = 0; i < pm.size(); ++i)
      g[m][i] = beta * (pm[i] - target[i]) / n;
  }
  return g;
}

inline LossBreakdown total_loss(double task, double mix, double sal, const LossWeights &w) {
  return {task, mix, sal, task + w.xi1 * mix + w.xi2 * sal};
}

} // namespace msmix
