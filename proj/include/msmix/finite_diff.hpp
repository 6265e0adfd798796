// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>

#include "msmix/matrix.hpp"

namespace msmix {

/// Central-difference gradient of `f` at `p`.
template <std::invocable<std::span<const double>> F>
Vector finite_diff_grad(F &&f, Vector p, double h = 1e-5) {
  if (!(h > 0.0))
    throw ValueError("finite_diff_grad: step must be positive");
  Vector g(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double fp = f(std::span<const double>(p));
    p[i] = orig - h;
    const double fm = f(std::span<const double>(p));
    p[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||); zero when both vectors vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  if (scale < 1e-12)
    return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

} // namespace msmix
