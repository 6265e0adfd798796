// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <json.hpp>

#include "msmix/losses.hpp"
#include "msmix/matrix.hpp"

namespace msmix {

struct MetricsReport {
  double mae = 0.0;
  double acc2 = 0.0;
  double w_acc2 = 0.0;
  double acc5 = 0.0;
  double acc7 = 0.0;
  double f1 = 0.0;
  double w_f1 = 0.0;
  std::vector<LossBreakdown> loss_trail; // per-epoch mean of step losses

  friend bool operator==(const MetricsReport &a, const MetricsReport &b) {
    auto same = [](const LossBreakdown &x, const LossBreakdown &y) {
      return x.task == y.task && x.mix_mse == y.mix_mse && x.sal == y.sal && x.total == y.total;
    };
    return a.mae == b.mae && a.acc2 == b.acc2 && a.w_acc2 == b.w_acc2 && a.acc5 == b.acc5 &&
           a.acc7 == b.acc7 && a.f1 == b.f1 && a.w_f1 == b.w_f1 &&
           std::equal(a.loss_trail.begin(), a.loss_trail.end(), b.loss_trail.begin(), b.loss_trail.end(), same);
  }
};

namespace detail {

/// Binary F1 of `positive_class`; defined as 1 when that class never occurs
/// in either predictions or labels.
inline double binary_f1(const std::vector<bool> &pred, const std::vector<bool> &truth, bool positive_class) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == positive_class, t = truth[i] == positive_class;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  if (tp + fp + fn == 0)
    return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

inline double accuracy(const std::vector<bool> &pred, const std::vector<bool> &truth) {
  if (pred.empty())
    return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

inline double bucket(double x, double bound) { return std::round(std::clamp(x, -bound, bound)); }

} // namespace detail

/// Regression and bucketed-classification metrics.
///
/// ACC2/F1 split scores into negative vs. non-negative; the w- variants drop
/// samples whose label is exactly zero, and w-F1 is the support-weighted F1
/// over both classes. ACC7 rounds after clamping to [-3, 3], ACC5 after
/// clamping to [-2, 2].
inline MetricsReport compute_metrics(const Vector &pred, const Vector &labels) {
  if (pred.size() != labels.size())
    throw DimensionError("compute_metrics: length mismatch");
  if (pred.empty())
    throw ValueError("compute_metrics: empty split");
  MetricsReport r;
  const double n = static_cast<double>(pred.size());
  std::vector<bool> pb, tb, wpb, wtb;
  std::size_t hit5 = 0, hit7 = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.mae += std::abs(pred[i] - labels[i]);
    pb.push_back(pred[i] >= 0.0);
    tb.push_back(labels[i] >= 0.0);
    if (labels[i] != 0.0) {
      wpb.push_back(pred[i] > 0.0);
      wtb.push_back(labels[i] > 0.0);
    }
    hit5 += detail::bucket(pred[i], 2.0) == detail::bucket(labels[i], 2.0);
    hit7 += detail::bucket(pred[i], 3.0) == detail::bucket(labels[i], 3.0);
  }
  r.mae /= n;
  r.acc2 = detail::accuracy(pb, tb);
  r.w_acc2 = detail::accuracy(wpb, wtb);
  r.acc5 = static_cast<double>(hit5) / n;
  r.acc7 = static_cast<double>(hit7) / n;
  r.f1 = detail::binary_f1(pb, tb, true);
  if (!wtb.empty()) {
    const auto pos = static_cast<double>(std::count(wtb.begin(), wtb.end(), true));
    const auto neg = static_cast<double>(wtb.size()) - pos;
    r.w_f1 = (pos * detail::binary_f1(wpb, wtb, true) + neg * detail::binary_f1(wpb, wtb, false)) /
             static_cast<double>(wtb.size());
  }
  return r;
}

inline nlohmann::json loss_to_json(const LossBreakdown &l) {
  return {{"task", l.task}, {"mix_mse", l.mix_mse}, {"sal", l.sal}, {"total", l.total}};
}

inline nlohmann::json metrics_to_json(const MetricsReport &r) {
  nlohmann::json trail = nlohmann::json::array();
  for (const auto &l : r.loss_trail)
    trail.push_back(loss_to_json(l));
  return {{"MAE", r.mae}, {"ACC2", r.acc2}, {"w-ACC2", r.w_acc2}, {"ACC5", r.acc5},
          {"ACC7", r.acc7}, {"F1", r.f1},    {"w-F1", r.w_f1},     {"loss_trail", trail}};
}

} // namespace msmix
