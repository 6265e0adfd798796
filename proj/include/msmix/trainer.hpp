// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "msmix/config.hpp"
#include "msmix/dataset.hpp"
#include "msmix/metrics.hpp"
#include "msmix/objective.hpp"

namespace msmix {

/// Adam with bias-corrected moments over every tensor of a ModelParams.
class Adam {
public:
  explicit Adam(const ModelParams &shape, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    shape.for_each_tensor([&](const std::string &, const Matrix &m) {
      m1_.emplace_back(m.size(), 0.0);
      m2_.emplace_back(m.size(), 0.0);
    });
  }

  void step(ModelParams &params, ModelParams &grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto ps = params.tensors();
    auto gs = grads.tensors();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      auto &p = ps[k]->values();
      const auto &g = gs[k]->values();
      for (std::size_t i = 0; i < p.size(); ++i) {
        m1_[k][i] = beta1_ * m1_[k][i] + (1.0 - beta1_) * g[i];
        m2_[k][i] = beta2_ * m2_[k][i] + (1.0 - beta2_) * g[i] * g[i];
        p[i] -= lr_ * (m1_[k][i] / c1) / (std::sqrt(m2_[k][i] / c2) + eps_);
      }
    }
  }

private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Vector> m1_, m2_;
};

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  LossBreakdown losses;
  std::size_t batch_size = 0;
  std::size_t mixed = 0;       // mixed samples appended to the batch
  bool skipped = false;        // SASS found no eligible pair
  double lambda_min = 1.0;     // over all λ^m and λ^L of the step
  double lambda_max = 0.0;
  std::size_t clamped_weights = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown mean_loss;
  MetricsReport val;
};

struct TrainResult {
  ModelParams params;
  MetricsReport report; // validation metrics after the last epoch, with the loss trail
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  std::size_t skipped_batches = 0;
  std::size_t clamped_weights = 0;
  std::uint64_t data_hash = 0;
};

inline ObjectiveOptions objective_options(const TrainConfig &c) {
  ObjectiveOptions o;
  o.weights = c.loss_weights();
  o.epsilon = c.epsilon;
  o.adaptive_ratios = c.mode == AugmentMode::ms_mix && c.sig_on;
  o.alignment = c.mode == AugmentMode::ms_mix && c.sal_on;
  if (c.mode == AugmentMode::no_augment) {
    o.weights.xi1 = 0.0;
    o.weights.xi2 = 0.0;
  }
  if (!o.alignment)
    o.weights.xi2 = 0.0;
  return o;
}

/// Picks pairs and base ratios for one batch according to the mode and flags.
inline StepPlan plan_step(const TrainConfig &c, const ModelParams &params, const PerModality<Matrix> &raw,
                          Rng &rng, bool *skipped = nullptr) {
  StepPlan step;
  const std::size_t b = raw[0].rows();
  if (skipped)
    *skipped = false;
  if (c.mode == AugmentMode::no_augment || b < 2)
    return step;
  if (c.mode == AugmentMode::ms_mix && c.sass_on) {
    const FullBatch latent = encode(params.backbone, raw);
    step.selection = select_pairs(similarity_matrix(latent, c.delta), b, rng);
    if (skipped)
      *skipped = step.selection.skipped();
  } else {
    step.selection = random_pairs(b, b, rng);
  }
  step.lambda_base = draw_base_ratios(step.selection.pairs.size(), rng, c.alpha);
  return step;
}

inline MetricsReport evaluate(const ModelParams &params, const Dataset &split) {
  if (split.size() == 0)
    throw ValueError("evaluate: empty split");
  return compute_metrics(predict(params.backbone, split.features), split.labels);
}

/// The training split after the configured occlusion; val and test stay clean.
inline DatasetSplits prepare_splits(const TrainConfig &c, const Dataset &data) {
  DatasetSplits s = split_dataset(data, derive_seed(c.seed, SeedStream::split));
  if (c.occlusion_ratio > 0.0) {
    Rng rng(derive_seed(c.seed, SeedStream::occlusion));
    s.train = occlude(std::move(s.train), c.occlusion_ratio, rng, c.occlusion_mode);
  }
  return s;
}

inline TrainResult train(const TrainConfig &c, const Dataset &data) {
  c.validate();
  data.validate();
  const DatasetSplits splits = prepare_splits(c, data);
  if (splits.train.size() == 0 || splits.val.size() == 0)
    throw ValueError("train: dataset too small for a non-empty train/val split");

  TrainResult result;
  result.data_hash = dataset_hash(data);
  Rng init_rng(derive_seed(c.seed, SeedStream::init));
  result.params = ModelParams::init(backbone_dims(c, data), c.heads, init_rng);
  Rng shuffle_rng(derive_seed(c.seed, SeedStream::shuffle));
  Rng augment_rng(derive_seed(c.seed, SeedStream::augment));
  Adam opt(result.params, c.learning_rate);
  const ObjectiveOptions options = objective_options(c);
  const Dataset &tr = splits.train;

  std::size_t step_no = 0;
  ModelParams grads;
  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    const auto order = shuffle_rng.permutation(tr.size());
    LossBreakdown sum;
    std::size_t steps_in_epoch = 0;
    for (std::size_t start = 0; start < order.size(); start += c.batch_size) {
      const std::size_t len = std::min(c.batch_size, order.size() - start);
      const Dataset batch = tr.subset(std::span<const std::size_t>(order).subspan(start, len), Split::train);
      StepLog log;
      const StepPlan plan = plan_step(c, result.params, batch.features, augment_rng, &log.skipped);
      const StepResult r = evaluate_objective(result.params, batch.features, batch.labels, plan, options, &grads);
      opt.step(result.params, grads);

      log.step = ++step_no;
      log.epoch = epoch;
      log.losses = r.losses;
      log.batch_size = len;
      log.mixed = r.plan.size();
      log.clamped_weights = r.clamped_weights;
      for (const auto &ratios : r.plan.ratios)
        for (double l : ratios) {
          log.lambda_min = std::min(log.lambda_min, l);
          log.lambda_max = std::max(log.lambda_max, l);
        }
      for (double l : r.plan.label_ratio) {
        log.lambda_min = std::min(log.lambda_min, l);
        log.lambda_max = std::max(log.lambda_max, l);
      }
      result.skipped_batches += log.skipped;
      result.clamped_weights += log.clamped_weights;
      result.steps.push_back(log);

      sum.task += r.losses.task;
      sum.mix_mse += r.losses.mix_mse;
      sum.sal += r.losses.sal;
      sum.total += r.losses.total;
      ++steps_in_epoch;
    }
    if (!result.params.backbone.fusion_weight.all_finite())
      throw Error("training diverged: non-finite parameters at epoch " + std::to_string(epoch));
    const double k = static_cast<double>(std::max<std::size_t>(1, steps_in_epoch));
    EpochLog e{epoch, {sum.task / k, sum.mix_mse / k, sum.sal / k, sum.total / k}, evaluate(result.params, splits.val)};
    result.report.loss_trail.push_back(e.mean_loss);
    result.epochs.push_back(std::move(e));
  }
  const MetricsReport val = evaluate(result.params, splits.val);
  auto trail = std::move(result.report.loss_trail);
  result.report = val;
  result.report.loss_trail = std::move(trail);
  return result;
}

// ---------------------------------------------------------------------------
// Experiment runners

struct AblationVariant {
  std::string name;
  AugmentMode mode;
  bool sass_on, sig_on, sal_on;
};

/// Baseline latent mixup plus each component combination down to the full method.
inline std::vector<AblationVariant> ablation_grid() {
  return {{"baseline", AugmentMode::vanilla_mix, false, false, false},
          {"+SASS", AugmentMode::ms_mix, true, false, false},
          {"+SIG", AugmentMode::ms_mix, false, true, false},
          {"+SIG+SAL", AugmentMode::ms_mix, false, true, true},
          {"+SASS+SIG", AugmentMode::ms_mix, true, true, false},
          {"full", AugmentMode::ms_mix, true, true, true}};
}

inline TrainConfig apply_variant(TrainConfig c, const AblationVariant &v) {
  c.mode = v.mode;
  c.sass_on = v.sass_on;
  c.sig_on = v.sig_on;
  c.sal_on = v.sal_on;
  return c;
}

struct AblationRow {
  AblationVariant variant;
  std::uint64_t seed = 0;
  std::uint64_t data_hash = 0;
  MetricsReport metrics;
};

inline std::vector<AblationRow> run_ablation(const TrainConfig &c, const Dataset &data) {
  std::vector<AblationRow> rows;
  for (const auto &v : ablation_grid()) {
    const TrainResult r = train(apply_variant(c, v), data);
    rows.push_back({v, c.seed, r.data_hash, r.report});
  }
  return rows;
}

inline const std::vector<double> &default_occlusion_ratios() {
  static const std::vector<double> r{0.0, 0.1, 0.2, 0.3, 0.4};
  return r;
}

inline const std::vector<AugmentMode> &all_modes() {
  static const std::vector<AugmentMode> m{AugmentMode::no_augment, AugmentMode::vanilla_mix, AugmentMode::ms_mix};
  return m;
}

struct OcclusionRow {
  double ratio = 0.0;
  AugmentMode mode = AugmentMode::ms_mix;
  MetricsReport metrics;
};

/// One train + evaluate per (ratio, mode), ratios outermost, all with the config seed.
inline std::vector<OcclusionRow> run_occlusion_sweep(const TrainConfig &c, const Dataset &data,
                                                     const std::vector<double> &ratios,
                                                     const std::vector<AugmentMode> &modes = all_modes()) {
  for (double r : ratios)
    if (!(r >= 0.0 && r <= kMaxOcclusionRatio))
      throw ValueError("occlusion sweep: ratio " + std::to_string(r) + " outside [0, 0.4]");
  std::vector<OcclusionRow> rows;
  for (double r : ratios)
    for (AugmentMode m : modes) {
      TrainConfig cc = c;
      cc.occlusion_ratio = r;
      cc.mode = m;
      rows.push_back({r, m, train(cc, data).report});
    }
  return rows;
}

struct HyperGrid {
  std::vector<double> delta{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> xi1;
  std::vector<double> xi2;
  std::vector<double> alpha;
  std::vector<std::size_t> heads;
};

struct HyperPoint {
  double delta, xi1, xi2, alpha;
  std::size_t heads;
};

struct HyperRow {
  HyperPoint point;
  MetricsReport metrics;
};

/// Cartesian product of the grid; an empty axis falls back to the config value.
inline std::vector<HyperPoint> expand_grid(const TrainConfig &c, const HyperGrid &g) {
  const auto or_default = [](std::vector<double> v, double d) { return v.empty() ? std::vector<double>{d} : v; };
  const auto deltas = or_default(g.delta, c.delta);
  const auto xi1s = or_default(g.xi1, c.xi1);
  const auto xi2s = or_default(g.xi2, c.xi2);
  const auto alphas = or_default(g.alpha, c.alpha);
  const auto heads = g.heads.empty() ? std::vector<std::size_t>{c.heads} : g.heads;
  std::vector<HyperPoint> out;
  for (double d : deltas)
    for (double a : xi1s)
      for (double b : xi2s)
        for (double al : alphas)
          for (std::size_t h : heads)
            out.push_back({d, a, b, al, h});
  return out;
}

inline std::vector<HyperRow> hyper_sweep(const TrainConfig &c, const Dataset &data, const HyperGrid &g) {
  const auto points = expand_grid(c, g);
  if (points.empty())
    throw ValueError("hyper_sweep: empty grid");
  std::vector<HyperRow> rows;
  for (const auto &p : points) {
    TrainConfig cc = c;
    cc.delta = p.delta;
    cc.xi1 = p.xi1;
    cc.xi2 = p.xi2;
    cc.alpha = p.alpha;
    cc.heads = p.heads;
    rows.push_back({p, train(cc, data).report});
  }
  return rows;
}

} // namespace msmix
