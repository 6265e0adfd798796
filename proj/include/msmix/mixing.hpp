// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "msmix/intensity.hpp"
#include "msmix/sass.hpp"

namespace msmix {

inline constexpr double kWeightEpsilon = 1e-8;
inline constexpr double kDefaultAlpha = 2.0;
// Below this, an intensity range or a weight sum counts as degenerate.
inline constexpr double kDegenerateTolerance = 1e-12;

/// Min-max weights exactly as (|I_i| - min I) / (max I - min I + eps).
///
/// The numerator uses |I| while min/max use signed I, so a strongly negative
/// intensity can produce a weight above one. A batch whose intensities span
/// less than 1e-12 gets all-zero weights.
inline Vector intensity_to_weights(const Vector &intensities, double eps = kWeightEpsilon) {
  if (intensities.empty())
    throw ValueError("intensity_to_weights: empty input");
  const auto [mn, mx] = std::minmax_element(intensities.begin(), intensities.end());
  const double lo = *mn, hi = *mx;
  Vector w(intensities.size(), 0.0);
  if (hi - lo < kDegenerateTolerance)
    return w;
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = (std::abs(intensities[i]) - lo) / (hi - lo + eps);
  return w;
}

struct IntensityOutput {
  Vector intensities;
  Vector weights;       // clamped to [0, 1]
  Vector raw_weights;   // before clamping
  double epsilon = kWeightEpsilon;
  std::size_t clamped = 0; // entries the clamp changed
};

inline IntensityOutput make_intensity_output(Vector intensities, double eps = kWeightEpsilon) {
  IntensityOutput out;
  out.raw_weights = intensity_to_weights(intensities, eps);
  out.weights = out.raw_weights;
  for (double &w : out.weights) {
    const double c = std::clamp(w, 0.0, 1.0);
    if (c != w)
      ++out.clamped;
    w = c;
  }
  out.intensities = std::move(intensities);
  out.epsilon = eps;
  return out;
}

/// dL/dI for the clamped weights given dL/dω. Clamped entries pass no gradient.
inline Vector intensity_to_weights_backward(const IntensityOutput &out, const Vector &grad_w) {
  const Vector &in = out.intensities;
  Vector g(in.size(), 0.0);
  const auto mn = std::min_element(in.begin(), in.end());
  const auto mx = std::max_element(in.begin(), in.end());
  const double lo = *mn, hi = *mx;
  if (hi - lo < kDegenerateTolerance)
    return g;
  const std::size_t imin = static_cast<std::size_t>(mn - in.begin());
  const std::size_t imax = static_cast<std::size_t>(mx - in.begin());
  const double denom = hi - lo + out.epsilon;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const double raw = out.raw_weights[k];
    if (raw < 0.0 || raw > 1.0)
      continue;
    const double gw = grad_w[k];
    const double num = std::abs(in[k]) - lo;
    const double sign = in[k] > 0.0 ? 1.0 : (in[k] < 0.0 ? -1.0 : 0.0);
    g[k] += gw * sign / denom;
    g[imin] += gw * (-1.0 / denom + num / (denom * denom));
    g[imax] += gw * (-num / (denom * denom));
  }
  return g;
}

/// (ω_i / (ω_i + ω_j) + λ_base) / 2, with the quotient taken as 0.5 when the
/// weights sum to (nearly) zero.
inline double pair_ratio(double wi, double wj, double lambda_base) {
  const double sum = wi + wj;
  const double q = sum < kDegenerateTolerance ? 0.5 : wi / sum;
  return std::clamp((q + lambda_base) / 2.0, 0.0, 1.0);
}

struct MixPlan {
  PairSelection selection;
  Vector lambda_base;            // per pair
  PerModality<Vector> ratios;    // λ^m per pair
  Vector label_ratio;            // λ^L per pair

  std::size_t size() const noexcept { return selection.pairs.size(); }
  bool empty() const noexcept { return selection.pairs.empty(); }
};

inline void finalize_label_ratio(MixPlan &plan) {
  plan.label_ratio.assign(plan.size(), 0.0);
  for (std::size_t p = 0; p < plan.size(); ++p) {
    double s = 0.0;
    for (const auto &r : plan.ratios)
      s += r[p];
    plan.label_ratio[p] = s / static_cast<double>(kNumModalities);
  }
}

/// Adaptive ratios for fixed pairs and base ratios.
inline MixPlan plan_from_weights(const PairSelection &selection, Vector lambda_base,
                                 const PerModality<Vector> &weights) {
  if (lambda_base.size() != selection.pairs.size())
    throw DimensionError("plan_from_weights: one lambda_base per pair required");
  MixPlan plan{selection, std::move(lambda_base), {}, {}};
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    plan.ratios[m].resize(plan.size());
    for (std::size_t p = 0; p < plan.size(); ++p) {
      const auto [i, j] = plan.selection.pairs[p];
      if (i >= weights[m].size() || j >= weights[m].size())
        throw DimensionError("plan_from_weights: pair index out of range");
      plan.ratios[m][p] = pair_ratio(weights[m][i], weights[m][j], plan.lambda_base[p]);
    }
  }
  finalize_label_ratio(plan);
  return plan;
}

/// Every modality and the label share the base ratio (SIG disabled).
inline MixPlan plan_shared_ratio(const PairSelection &selection, Vector lambda_base) {
  if (lambda_base.size() != selection.pairs.size())
    throw DimensionError("plan_shared_ratio: one lambda_base per pair required");
  MixPlan plan{selection, std::move(lambda_base), {}, {}};
  for (auto &r : plan.ratios)
    r = plan.lambda_base;
  plan.label_ratio = plan.lambda_base;
  return plan;
}

inline Vector draw_base_ratios(std::size_t count, Rng &rng, double alpha) {
  Vector base(count);
  for (double &b : base)
    b = sample_beta(rng, alpha);
  return base;
}

/// One λ_base ~ Beta(α, α) per pair, shared by the pair's three modalities.
inline MixPlan build_mix_plan(const PairSelection &selection,
                              const PerModality<IntensityOutput> &intensities, Rng &rng,
                              double alpha = kDefaultAlpha) {
  Vector base = draw_base_ratios(selection.pairs.size(), rng, alpha);
  PerModality<Vector> w;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    w[m] = intensities[m].weights;
  return plan_from_weights(selection, std::move(base), w);
}

struct MixedBatch {
  PerModality<Matrix> features; // pairs x d^m
  Vector labels;
};

inline void check_pair_bounds(const MixPlan &plan, std::size_t n, const char *what) {
  for (const auto &pr : plan.selection.pairs)
    if (pr.i >= n || pr.j >= n)
      throw DimensionError(std::string(what) + ": pair index out of range");
}

/// ẑ^m = λ^m z_i + (1 - λ^m) z_j per modality.
inline PerModality<Matrix> mix_features(const MixPlan &plan, const FullBatch &batch) {
  PerModality<Matrix> out;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const Matrix &z = batch[m].features;
    check_pair_bounds(plan, z.rows(), "mix_features");
    Matrix mixed(plan.size(), z.cols());
    for (std::size_t p = 0; p < plan.size(); ++p) {
      const auto [i, j] = plan.selection.pairs[p];
      const double lam = plan.ratios[m][p];
      for (std::size_t c = 0; c < z.cols(); ++c)
        mixed(p, c) = lam * z(i, c) + (1.0 - lam) * z(j, c);
    }
    out[m] = std::move(mixed);
  }
  return out;
}

inline Vector mix_labels(const MixPlan &plan, const Vector &labels) {
  check_pair_bounds(plan, labels.size(), "mix_labels");
  Vector out(plan.size());
  for (std::size_t p = 0; p < plan.size(); ++p) {
    const auto [i, j] = plan.selection.pairs[p];
    const double lam = plan.label_ratio[p];
    out[p] = lam * labels[i] + (1.0 - lam) * labels[j];
  }
  return out;
}

inline MixedBatch apply_mix_plan(const MixPlan &plan, const FullBatch &batch, const Vector &labels) {
  return {mix_features(plan, batch), mix_labels(plan, labels)};
}

/// Latent mixup baseline: random pairs, one Beta ratio shared by all
/// modalities and the label. Produces one mixed sample per batch row.
inline MixPlan vanilla_latent_plan(std::size_t batch_size, Rng &rng, double alpha = kDefaultAlpha) {
  PairSelection sel = random_pairs(batch_size, batch_size, rng);
  Vector base = draw_base_ratios(sel.pairs.size(), rng, alpha);
  return plan_shared_ratio(sel, std::move(base));
}

inline MixedBatch vanilla_latent_mix(const FullBatch &batch, const Vector &labels, Rng &rng,
                                     double alpha = kDefaultAlpha) {
  const MixPlan plan = vanilla_latent_plan(checked_batch_size(batch), rng, alpha);
  return apply_mix_plan(plan, batch, labels);
}

} // namespace msmix
