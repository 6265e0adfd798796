// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "msmix/matrix.hpp"

namespace msmix {

enum class Modality : std::size_t { text = 0, video = 1, audio = 2 };

inline constexpr std::size_t kNumModalities = 3;
inline constexpr std::array<Modality, kNumModalities> kModalities{Modality::text, Modality::video,
                                                                  Modality::audio};

/// One-letter key used in files: t, v, a.
constexpr std::string_view modality_key(Modality m) {
  switch (m) {
  case Modality::text:
    return "t";
  case Modality::video:
    return "v";
  case Modality::audio:
    return "a";
  }
  return "?";
}

template <class T> using PerModality = std::array<T, kNumModalities>;

/// Latent features of one modality for a mini-batch (B x d^m).
struct ModalityBatch {
  Modality modality = Modality::text;
  Matrix features;

  std::size_t batch_size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
};

using FullBatch = PerModality<ModalityBatch>;

inline FullBatch make_full_batch(PerModality<Matrix> features) {
  FullBatch b;
  for (Modality m : kModalities)
    b[static_cast<std::size_t>(m)] = ModalityBatch{m, std::move(features[static_cast<std::size_t>(m)])};
  return b;
}

/// Shared batch size; throws when the three modalities disagree.
inline std::size_t checked_batch_size(const FullBatch &batch) {
  const std::size_t b = batch[0].batch_size();
  for (const auto &mb : batch)
    if (mb.batch_size() != b)
      throw DimensionError("modalities disagree on batch size");
  return b;
}

} // namespace msmix
