// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "msmix/dataset.hpp"
#include "msmix/objective.hpp"

namespace msmix {

/// Shortest-round-trip-safe text for CSV cells.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline constexpr std::string_view kCheckpointFormat = "msmix-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Header with the shapes needed to rebuild the parameter set, then one flat
/// row-major array per named tensor.
inline nlohmann::json checkpoint_to_json(const ModelParams &p) {
  const auto &d = p.backbone.dims;
  nlohmann::json j;
  j["format"] = std::string(kCheckpointFormat);
  j["version"] = kCheckpointVersion;
  j["shape"] = {{"raw", {d.raw[0], d.raw[1], d.raw[2]}},
                {"latent", {d.latent[0], d.latent[1], d.latent[2]}},
                {"hidden", d.hidden},
                {"heads", p.heads()}};
  nlohmann::json tensors = nlohmann::json::array();
  p.for_each_tensor([&](const std::string &name, const Matrix &m) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}});
  });
  j["tensors"] = std::move(tensors);
  return j;
}

inline ModelParams checkpoint_from_json(const nlohmann::json &j) {
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
    throw ParseError("format", "not an msmix checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw ParseError("version", "unsupported checkpoint version");
  if (!j.contains("shape") || !j["shape"].is_object())
    throw ParseError("shape", "missing shape header");
  const auto &s = j["shape"];
  BackboneDims dims;
  std::size_t heads = 0;
  try {
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      dims.raw[m] = s.at("raw").at(m).get<std::size_t>();
      dims.latent[m] = s.at("latent").at(m).get<std::size_t>();
    }
    dims.hidden = s.at("hidden").get<std::size_t>();
    heads = s.at("heads").get<std::size_t>();
  } catch (const nlohmann::json::exception &e) {
    throw ParseError("shape", e.what());
  }
  ModelParams p = ModelParams::zeros(dims, heads);
  if (!j.contains("tensors") || !j["tensors"].is_array())
    throw ParseError("tensors", "missing tensor list");
  const auto &tensors = j["tensors"];
  std::size_t k = 0;
  p.for_each_tensor([&](const std::string &name, Matrix &m) {
    const std::string field = "tensors." + name;
    if (k >= tensors.size())
      throw ParseError(field, "missing tensor");
    const auto &t = tensors[k++];
    if (t.value("name", "") != name)
      throw ParseError(field, "expected tensor '" + name + "'");
    if (t.value("rows", std::size_t{0}) != m.rows() || t.value("cols", std::size_t{0}) != m.cols())
      throw ParseError(field, "shape does not match header (expected " + shape_string(m) + ")");
    if (!t.contains("data") || !t["data"].is_array() || t["data"].size() != m.size())
      throw ParseError(field, "data length does not match shape");
    for (std::size_t i = 0; i < m.size(); ++i)
      m.values()[i] = detail::json_number(t["data"][i], field + ".data");
  });
  if (k != tensors.size())
    throw ParseError("tensors", "unexpected extra tensors");
  return p;
}

inline void save_checkpoint(const ModelParams &p, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot open '" + path + "' for writing");
  out << checkpoint_to_json(p).dump() << "\n";
}

inline ModelParams load_checkpoint(const std::string &path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError("<document>", e.what());
  }
  return checkpoint_from_json(j);
}

} // namespace msmix
