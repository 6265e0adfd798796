// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "msmix/modality.hpp"
#include "msmix/rng.hpp"

namespace msmix {

enum class Split { train, val, test, all };

constexpr std::string_view split_name(Split s) {
  switch (s) {
  case Split::train:
    return "train";
  case Split::val:
    return "val";
  case Split::test:
    return "test";
  case Split::all:
    return "all";
  }
  return "all";
}

inline Split parse_split(std::string_view s) {
  if (s == "train")
    return Split::train;
  if (s == "val")
    return Split::val;
  if (s == "test")
    return Split::test;
  if (s == "all")
    return Split::all;
  throw ValueError("unknown split '" + std::string(s) + "'");
}

inline constexpr double kLabelMin = -3.0;
inline constexpr double kLabelMax = 3.0;

struct DatasetMeta {
  std::uint64_t seed = 0;
  double sigma = 0.0;
  friend bool operator==(const DatasetMeta &, const DatasetMeta &) = default;
};

/// n samples with a sentiment label in [-3, 3] and raw features per modality.
struct Dataset {
  Vector labels;
  PerModality<Matrix> features;
  Split split = Split::all;
  DatasetMeta meta;

  std::size_t size() const noexcept { return labels.size(); }

  void validate() const {
    for (std::size_t m = 0; m < kNumModalities; ++m)
      if (features[m].rows() != labels.size())
        throw DimensionError("dataset modality " + std::string(modality_key(kModalities[m])) +
                             " has " + std::to_string(features[m].rows()) + " rows for " +
                             std::to_string(labels.size()) + " labels");
  }

  /// Rows `idx` of every modality, in order.
  Dataset subset(std::span<const std::size_t> idx, Split tag) const {
    Dataset out;
    out.split = tag;
    out.meta = meta;
    out.labels.reserve(idx.size());
    for (std::size_t i : idx)
      out.labels.push_back(labels.at(i));
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      const Matrix &src = features[m];
      Matrix dst(idx.size(), src.cols());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        auto s = src.row(idx[r]);
        std::copy(s.begin(), s.end(), dst.row(r).begin());
      }
      out.features[m] = std::move(dst);
    }
    return out;
  }

  friend bool operator==(const Dataset &, const Dataset &) = default;
};

/// FNV-1a over labels and feature bit patterns.
inline std::uint64_t dataset_hash(const Dataset &d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double x) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (double y : d.labels)
    mix(y);
  for (const auto &f : d.features)
    for (double x : f.values())
      mix(x);
  return h;
}

struct SynthConfig {
  std::size_t n = 600;
  PerModality<std::size_t> raw_dims{16, 16, 16};
  double sigma = 0.1;
  /// Unit signal direction per modality; drawn from the seed when empty.
  std::optional<PerModality<Vector>> directions;
  std::uint64_t seed = 0;
};

inline Vector random_unit_vector(std::size_t dim, Rng &rng) {
  Vector u(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double &x : u) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double &x : u)
    x /= norm;
  return u;
}

/// Labels uniform in [-3, 3]; modality features y * u_m + sigma * N(0, 1).
inline Dataset generate(const SynthConfig &cfg) {
  if (cfg.n == 0)
    throw ValueError("generate: n must be at least 1");
  if (cfg.sigma < 0.0)
    throw ValueError("generate: sigma must be non-negative");
  Rng rng(cfg.seed);
  PerModality<Vector> dirs;
  if (cfg.directions) {
    dirs = *cfg.directions;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      if (dirs[m].size() != cfg.raw_dims[m])
        throw DimensionError("generate: direction length does not match raw dim");
      double norm = 0.0;
      for (double x : dirs[m])
        norm += x * x;
      if (std::abs(std::sqrt(norm) - 1.0) > 1e-9)
        throw ValueError("generate: signal directions must be unit vectors");
    }
  } else {
    for (std::size_t m = 0; m < kNumModalities; ++m)
      dirs[m] = random_unit_vector(cfg.raw_dims[m], rng);
  }

  Dataset d;
  d.meta = {cfg.seed, cfg.sigma};
  d.labels.resize(cfg.n);
  for (double &y : d.labels)
    y = rng.uniform(kLabelMin, kLabelMax);
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    Matrix x(cfg.n, cfg.raw_dims[m]);
    for (std::size_t i = 0; i < cfg.n; ++i)
      for (std::size_t c = 0; c < cfg.raw_dims[m]; ++c)
        x(i, c) = d.labels[i] * dirs[m][c] + cfg.sigma * rng.normal();
    d.features[m] = std::move(x);
  }
  return d;
}

enum class OcclusionMode { entries, modality };

inline constexpr double kMaxOcclusionRatio = 0.4;

inline OcclusionMode parse_occlusion_mode(std::string_view s) {
  if (s == "entries")
    return OcclusionMode::entries;
  if (s == "modality")
    return OcclusionMode::modality;
  throw ValueError("unknown occlusion mode '" + std::string(s) + "'");
}

constexpr std::string_view occlusion_mode_name(OcclusionMode m) {
  return m == OcclusionMode::entries ? "entries" : "modality";
}

/// Zeros raw inputs with probability `ratio`: independently per feature entry,
/// or per (sample, modality) block in `modality` mode. Labels are untouched.
inline Dataset occlude(Dataset d, double ratio, Rng &rng, OcclusionMode mode = OcclusionMode::entries) {
  if (!(ratio >= 0.0 && ratio <= kMaxOcclusionRatio))
    throw ValueError("occlusion ratio must lie in [0, 0.4], got " + std::to_string(ratio));
  if (ratio == 0.0)
    return d;
  for (auto &f : d.features) {
    if (mode == OcclusionMode::entries) {
      for (double &x : f.values())
        if (rng.uniform() < ratio)
          x = 0.0;
    } else {
      for (std::size_t i = 0; i < f.rows(); ++i)
        if (rng.uniform() < ratio)
          for (double &x : f.row(i))
            x = 0.0;
    }
  }
  return d;
}

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Seeded shuffle into 70 / 15 / 15.
inline DatasetSplits split_dataset(const Dataset &d, std::uint64_t seed) {
  Rng rng(seed);
  const auto perm = rng.permutation(d.size());
  const std::size_t n_train = d.size() * 70 / 100;
  const std::size_t n_val = d.size() * 15 / 100;
  std::span<const std::size_t> all(perm);
  return {d.subset(all.subspan(0, n_train), Split::train),
          d.subset(all.subspan(n_train, n_val), Split::val),
          d.subset(all.subspan(n_train + n_val), Split::test)};
}

// ---------------------------------------------------------------------------
// JSON file format

inline nlohmann::json matrix_rows_to_json(const Matrix &m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

inline nlohmann::json dataset_to_json(const Dataset &d) {
  d.validate();
  nlohmann::json j;
  j["n"] = d.size();
  j["split"] = std::string(split_name(d.split));
  j["labels"] = d.labels;
  nlohmann::json mods = nlohmann::json::object();
  for (Modality m : kModalities)
    mods[std::string(modality_key(m))] = matrix_rows_to_json(d.features[static_cast<std::size_t>(m)]);
  j["modalities"] = std::move(mods);
  j["meta"] = {{"seed", d.meta.seed}, {"sigma", d.meta.sigma}};
  return j;
}

namespace detail {
inline double json_number(const nlohmann::json &v, const std::string &field) {
  if (!v.is_number())
    throw ParseError(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x))
    throw ParseError(field, "non-finite value");
  return x;
}
} // namespace detail

inline Dataset dataset_from_json(const nlohmann::json &j) {
  if (!j.is_object())
    throw ParseError("<root>", "expected a JSON object");
  if (!j.contains("n") || !j["n"].is_number_unsigned())
    throw ParseError("n", "missing or not a non-negative integer");
  const std::size_t n = j["n"].get<std::size_t>();

  Dataset d;
  if (j.contains("split")) {
    if (!j["split"].is_string())
      throw ParseError("split", "expected a string");
    try {
      d.split = parse_split(j["split"].get<std::string>());
    } catch (const ValueError &e) {
      throw ParseError("split", e.what());
    }
  }
  if (!j.contains("labels") || !j["labels"].is_array())
    throw ParseError("labels", "missing or not an array");
  if (j["labels"].size() != n)
    throw ParseError("labels", "expected " + std::to_string(n) + " labels, found " +
                                   std::to_string(j["labels"].size()));
  for (std::size_t i = 0; i < n; ++i)
    d.labels.push_back(detail::json_number(j["labels"][i], "labels[" + std::to_string(i) + "]"));

  if (!j.contains("modalities") || !j["modalities"].is_object())
    throw ParseError("modalities", "missing or not an object");
  const auto &mods = j["modalities"];
  for (Modality m : kModalities) {
    const std::string key(modality_key(m));
    const std::string field = "modalities." + key;
    if (!mods.contains(key))
      throw ParseError(field, "missing modality");
    const auto &rows = mods[key];
    if (!rows.is_array() || rows.empty())
      throw ParseError(field, rows.is_array() ? "missing modality (no rows)" : "expected an array of rows");
    if (rows.size() != n)
      throw ParseError(field, "expected " + std::to_string(n) + " rows, found " + std::to_string(rows.size()));
    const std::size_t cols = rows[0].is_array() ? rows[0].size() : 0;
    if (cols == 0)
      throw ParseError(field + "[0]", "expected a non-empty array of numbers");
    Matrix x(n, cols);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string rf = field + "[" + std::to_string(i) + "]";
      if (!rows[i].is_array() || rows[i].size() != cols)
        throw ParseError(rf, "expected " + std::to_string(cols) + " numbers");
      for (std::size_t c = 0; c < cols; ++c)
        x(i, c) = detail::json_number(rows[i][c], rf + "[" + std::to_string(c) + "]");
    }
    d.features[static_cast<std::size_t>(m)] = std::move(x);
  }
  if (j.contains("meta")) {
    const auto &meta = j["meta"];
    if (!meta.is_object())
      throw ParseError("meta", "expected an object");
    if (meta.contains("seed")) {
      if (!meta["seed"].is_number_unsigned())
        throw ParseError("meta.seed", "expected a non-negative integer");
      d.meta.seed = meta["seed"].get<std::uint64_t>();
    }
    if (meta.contains("sigma"))
      d.meta.sigma = detail::json_number(meta["sigma"], "meta.sigma");
  }
  return d;
}

inline std::string dataset_to_string(const Dataset &d) { return dataset_to_json(d).dump() + "\n"; }

inline void save_dataset(const Dataset &d, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot open '" + path + "' for writing");
  out << dataset_to_string(d);
  if (!out)
    throw Error("failed writing '" + path + "'");
}

inline Dataset parse_dataset(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError("<document>", e.what());
  }
  return dataset_from_json(j);
}

inline std::string read_text_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Dataset load_dataset(const std::string &path) { return parse_dataset(read_text_file(path)); }

} // namespace msmix
