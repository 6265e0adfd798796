// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "msmix/backbone.hpp"
#include "msmix/intensity.hpp"
#include "msmix/losses.hpp"
#include "msmix/mixing.hpp"

namespace msmix {

/// Backbone plus the three modality-specific intensity predictors; this is
/// everything the joint objective optimizes.
struct ModelParams {
  BackboneParams backbone;
  PerModality<IntensityPredictorParams> predictors;

  static ModelParams zeros(const BackboneDims &dims, std::size_t heads) {
    ModelParams p{BackboneParams::zeros(dims), {}};
    for (std::size_t m = 0; m < kNumModalities; ++m)
      p.predictors[m] = IntensityPredictorParams::zeros(dims.latent[m], heads);
    return p;
  }

  static ModelParams init(const BackboneDims &dims, std::size_t heads, Rng &rng) {
    ModelParams p{BackboneParams::init(dims, rng), {}};
    for (std::size_t m = 0; m < kNumModalities; ++m)
      p.predictors[m] = IntensityPredictorParams::init(dims.latent[m], heads, rng);
    return p;
  }

  std::size_t heads() const noexcept { return predictors[0].heads; }

  template <class F> void for_each_tensor(F &&f) {
    backbone.for_each_tensor([&](const std::string &name, Matrix &m) { f("backbone." + name, m); });
    for (Modality mod : kModalities) {
      const std::string prefix = "predictor_" + std::string(modality_key(mod)) + ".";
      predictors[static_cast<std::size_t>(mod)].for_each_tensor(
          [&](const std::string &name, Matrix &m) { f(prefix + name, m); });
    }
  }
  template <class F> void for_each_tensor(F &&f) const {
    const_cast<ModelParams *>(this)->for_each_tensor(
        [&](const std::string &name, Matrix &m) { f(name, static_cast<const Matrix &>(m)); });
  }

  std::vector<Matrix *> tensors() {
    std::vector<Matrix *> out;
    for_each_tensor([&](const std::string &, Matrix &m) { out.push_back(&m); });
    return out;
  }

  std::vector<std::string> tensor_names() const {
    std::vector<std::string> out;
    for_each_tensor([&](const std::string &name, const Matrix &) { out.push_back(name); });
    return out;
  }

  Vector flatten() const {
    Vector v;
    for_each_tensor([&](const std::string &, const Matrix &m) {
      v.insert(v.end(), m.values().begin(), m.values().end());
    });
    return v;
  }

  void assign_flat(std::span<const double> v) {
    std::size_t offset = 0;
    for_each_tensor([&](const std::string &, Matrix &m) {
      if (offset + m.size() > v.size())
        throw DimensionError("assign_flat: vector too short");
      std::copy(v.begin() + static_cast<std::ptrdiff_t>(offset),
                v.begin() + static_cast<std::ptrdiff_t>(offset + m.size()), m.values().begin());
      offset += m.size();
    });
    if (offset != v.size())
      throw DimensionError("assign_flat: vector too long");
  }
};

/// Which terms and ratio rule the objective uses.
struct ObjectiveOptions {
  bool adaptive_ratios = true; // SIG ratios; otherwise λ^m = λ_base
  bool alignment = true;       // SAL term
  LossWeights weights;
  double epsilon = kWeightEpsilon;
};

/// Discrete choices fixed before the differentiable pass: which pairs are
/// mixed and the base ratios drawn for them. Keeping these fixed makes the
/// objective a smooth function of the parameters.
struct StepPlan {
  PairSelection selection;
  Vector lambda_base;
};

struct StepResult {
  LossBreakdown losses;
  MixPlan plan;
  PerModality<IntensityOutput> intensities; // empty vectors when the predictors are unused
  Vector predictions;                       // originals followed by mixed samples
  std::size_t clamped_weights = 0;
};

/// Forward pass of L_total on one batch; when `grads` is non-null it is
/// overwritten with the analytic gradient for every parameter.
inline StepResult evaluate_objective(const ModelParams &params, const PerModality<Matrix> &raw,
                                     const Vector &labels, const StepPlan &step,
                                     const ObjectiveOptions &opt, ModelParams *grads = nullptr) {
  const FullBatch latent = encode(params.backbone, raw);
  const std::size_t b = checked_batch_size(latent);
  if (labels.size() != b)
    throw DimensionError("evaluate_objective: labels do not match batch size");

  const bool mixing = !step.selection.pairs.empty();
  const bool need_intensity = opt.alignment || (mixing && opt.adaptive_ratios);

  StepResult r;
  PerModality<IntensityTrace> traces;
  if (need_intensity) {
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      traces[m] = predict_intensity_trace(params.predictors[m], latent[m].features);
      r.intensities[m] = make_intensity_output(traces[m].intensities, opt.epsilon);
      r.clamped_weights += r.intensities[m].clamped;
    }
  }

  if (mixing && opt.adaptive_ratios) {
    PerModality<Vector> w;
    for (std::size_t m = 0; m < kNumModalities; ++m)
      w[m] = r.intensities[m].weights;
    r.plan = plan_from_weights(step.selection, step.lambda_base, w);
  } else {
    r.plan = plan_shared_ratio(step.selection, mixing ? step.lambda_base : Vector{});
  }

  const PerModality<Matrix> mixed = mix_features(r.plan, latent);
  PerModality<Matrix> all;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    all[m] = vconcat(latent[m].features, mixed[m]);
  const FusionTrace fusion = fuse_predict_trace(params.backbone, all);
  r.predictions = fusion.predictions;

  const Vector pred_orig(fusion.predictions.begin(), fusion.predictions.begin() + static_cast<std::ptrdiff_t>(b));
  const Vector pred_mix(fusion.predictions.begin() + static_cast<std::ptrdiff_t>(b), fusion.predictions.end());
  const std::size_t np = r.plan.size();
  Vector yi(np), yj(np);
  for (std::size_t p = 0; p < np; ++p) {
    yi[p] = labels[r.plan.selection.pairs[p].i];
    yj[p] = labels[r.plan.selection.pairs[p].j];
  }

  PerModality<Vector> intensity_values;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    intensity_values[m] = r.intensities[m].intensities;

  const double task = task_mse(pred_orig, labels);
  const double mix = mixing ? mix_mse(pred_mix, yi, yj, r.plan.label_ratio) : 0.0;
  const double sal = opt.alignment ? sal_loss(intensity_values, labels, opt.weights.beta) : 0.0;
  r.losses = total_loss(task, mix, sal, opt.weights);

  if (grads == nullptr)
    return r;

  // Backward.
  *grads = ModelParams::zeros(params.backbone.dims, params.heads());
  const double xi1 = opt.weights.xi1, xi2 = opt.weights.xi2;

  Vector grad_pred(b + np, 0.0);
  const Vector g_task = task_mse_grad(pred_orig, labels);
  std::copy(g_task.begin(), g_task.end(), grad_pred.begin());
  MixMseGrads g_mix;
  if (mixing) {
    g_mix = mix_mse_grad(pred_mix, yi, yj, r.plan.label_ratio);
    for (std::size_t p = 0; p < np; ++p)
      grad_pred[b + p] = xi1 * g_mix.pred[p];
  }
  const PerModality<Matrix> grad_all = fuse_predict_backward(params.backbone, fusion, grad_pred, grads->backbone);

  PerModality<Matrix> grad_latent;
  PerModality<Vector> grad_ratio;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const Matrix &z = latent[m].features;
    const std::size_t d = z.cols();
    grad_latent[m] = Matrix(b, d);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t c = 0; c < d; ++c)
        grad_latent[m](i, c) = grad_all[m](i, c);
    grad_ratio[m].assign(np, 0.0);
    for (std::size_t p = 0; p < np; ++p) {
      const auto [i, j] = r.plan.selection.pairs[p];
      const double lam = r.plan.ratios[m][p];
      double gl = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double gz = grad_all[m](b + p, c);
        grad_latent[m](i, c) += lam * gz;
        grad_latent[m](j, c) += (1.0 - lam) * gz;
        gl += gz * (z(i, c) - z(j, c));
      }
      grad_ratio[m][p] = gl + xi1 * g_mix.lambda[p] / static_cast<double>(kNumModalities);
    }
  }

  if (need_intensity) {
    PerModality<Vector> grad_sal;
    if (opt.alignment)
      grad_sal = sal_loss_grad(intensity_values, labels, opt.weights.beta);
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      Vector grad_intensity(b, 0.0);
      if (mixing && opt.adaptive_ratios) {
        const Vector &w = r.intensities[m].weights;
        Vector grad_w(b, 0.0);
        for (std::size_t p = 0; p < np; ++p) {
          const auto [i, j] = r.plan.selection.pairs[p];
          const double s = w[i] + w[j];
          if (s < kDegenerateTolerance)
            continue;
          const double half = 0.5 * grad_ratio[m][p];
          grad_w[i] += half * w[j] / (s * s);
          grad_w[j] -= half * w[i] / (s * s);
        }
        grad_intensity = intensity_to_weights_backward(r.intensities[m], grad_w);
      }
      if (opt.alignment)
        for (std::size_t i = 0; i < b; ++i)
          grad_intensity[i] += xi2 * grad_sal[m][i];
      IntensityGrads gi = predict_intensity_backward(params.predictors[m], traces[m], grad_intensity);
      grads->predictors[m] = std::move(gi.params);
      grad_latent[m] += gi.input;
    }
  }

  encode_backward(raw, latent, grad_latent, grads->backbone);
  return r;
}

} // namespace msmix
