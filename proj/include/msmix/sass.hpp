// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "msmix/modality.hpp"
#include "msmix/rng.hpp"

namespace msmix {

inline constexpr double kDefaultSimilarityThreshold = 0.2;

struct SimilarityReport {
  Matrix similarity;         // B x B, averaged cross-modal cosine
  double mean_offdiag = 0.0; // mean over i != j
  double threshold = kDefaultSimilarityThreshold;
};

struct SamplePair {
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const SamplePair &, const SamplePair &) = default;
};

struct PairSelection {
  std::vector<SamplePair> pairs;
  std::size_t target = 0;
  bool skipped() const noexcept { return pairs.empty(); }
};

/// S = mean over modalities of Zn Znᵀ, with Zn the row-L2-normalized latent
/// features.
inline SimilarityReport similarity_matrix(const FullBatch &batch,
                                          double threshold = kDefaultSimilarityThreshold) {
  const std::size_t b = checked_batch_size(batch);
  if (b < 2)
    throw DimensionError("similarity_matrix needs a batch of at least two samples");
  Matrix s(b, b);
  for (const auto &mb : batch) {
    const Matrix zn = l2_normalize_rows(mb.features);
    s += matmul(zn, transpose(zn));
  }
  s *= 1.0 / static_cast<double>(kNumModalities);
  // Bitwise symmetry: the two triangles come from different summation orders.
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j)
      s(j, i) = s(i, j);

  double off = 0.0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j)
      if (i != j)
        off += s(i, j);
  const double n = static_cast<double>(b);
  return {std::move(s), off / (n * (n - 1.0)), threshold};
}

/// Pairs (i < j) with similarity strictly above the report's threshold.
inline std::vector<SamplePair> eligible_pairs(const SimilarityReport &report) {
  std::vector<SamplePair> out;
  const std::size_t b = report.similarity.rows();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j)
      if (report.similarity(i, j) > report.threshold)
        out.push_back({i, j});
  return out;
}

/// Draws `target` pairs uniformly from the eligible set. Draws are with
/// replacement, so a small eligible set still fills the target; an empty
/// eligible set yields an empty selection (augmentation is skipped).
inline PairSelection select_pairs(const SimilarityReport &report, std::size_t target, Rng &rng) {
  if (target == 0)
    throw ValueError("select_pairs: target must be at least 1");
  PairSelection sel;
  sel.target = target;
  const auto pool = eligible_pairs(report);
  if (pool.empty())
    return sel;
  sel.pairs.reserve(target);
  for (std::size_t k = 0; k < target; ++k)
    sel.pairs.push_back(pool[rng.index(pool.size())]);
  return sel;
}

/// Uniform random pairs with i != j, ignoring similarity. Used with SASS off
/// and by the vanilla latent mixup baseline.
inline PairSelection random_pairs(std::size_t batch_size, std::size_t target, Rng &rng) {
  if (batch_size < 2)
    throw DimensionError("random_pairs needs a batch of at least two samples");
  PairSelection sel;
  sel.target = target;
  sel.pairs.reserve(target);
  for (std::size_t k = 0; k < target; ++k) {
    const std::size_t i = rng.index(batch_size);
    std::size_t j = rng.index(batch_size - 1);
    if (j >= i)
      ++j;
    sel.pairs.push_back({i, j});
  }
  return sel;
}

} // namespace msmix
