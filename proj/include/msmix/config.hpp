// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "msmix/backbone.hpp"
#include "msmix/dataset.hpp"
#include "msmix/losses.hpp"
#include "msmix/mixing.hpp"
#include "msmix/sass.hpp"

namespace msmix {

enum class AugmentMode { no_augment, vanilla_mix, ms_mix };

constexpr std::string_view mode_name(AugmentMode m) {
  switch (m) {
  case AugmentMode::no_augment:
    return "no_augment";
  case AugmentMode::vanilla_mix:
    return "vanilla_mix";
  case AugmentMode::ms_mix:
    return "ms_mix";
  }
  return "ms_mix";
}

inline AugmentMode parse_mode(std::string_view s) {
  if (s == "no_augment")
    return AugmentMode::no_augment;
  if (s == "vanilla_mix")
    return AugmentMode::vanilla_mix;
  if (s == "ms_mix")
    return AugmentMode::ms_mix;
  throw ValueError("unknown mode '" + std::string(s) + "'");
}

struct TrainConfig {
  double alpha = kDefaultAlpha;
  double delta = kDefaultSimilarityThreshold;
  double xi1 = 0.7;
  double xi2 = 0.5;
  double beta = 1000.0;
  double epsilon = kWeightEpsilon;
  std::size_t heads = 4;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  AugmentMode mode = AugmentMode::ms_mix;
  bool sass_on = true;
  bool sig_on = true;
  bool sal_on = true;
  double occlusion_ratio = 0.0;
  OcclusionMode occlusion_mode = OcclusionMode::entries;
  std::size_t latent_dim = 8;
  std::size_t hidden_dim = 16;

  LossWeights loss_weights() const { return {xi1, xi2, beta}; }

  /// Throws ValueError naming the first violated constraint.
  void validate() const {
    auto fail = [](const std::string &msg) { throw ValueError("invalid config: " + msg); };
    if (!(alpha > 0.0))
      fail("alpha must be positive");
    if (!(delta >= -1.0 && delta <= 1.0))
      fail("delta must lie in [-1, 1]");
    if (!(xi1 >= 0.0) || !(xi2 >= 0.0))
      fail("xi1 and xi2 must be non-negative");
    if (!(beta > 0.0))
      fail("beta must be positive");
    if (!(epsilon > 0.0))
      fail("epsilon must be positive");
    if (heads == 0)
      fail("heads must be at least 1");
    if (batch_size < 2)
      fail("batch_size must be at least 2");
    if (!(learning_rate > 0.0))
      fail("learning_rate must be positive");
    if (sal_on && !sig_on)
      fail("sal_on requires sig_on (the alignment loss trains the SIG predictor)");
    if (!(occlusion_ratio >= 0.0 && occlusion_ratio <= kMaxOcclusionRatio))
      fail("occlusion_ratio must lie in [0, 0.4]");
    if (latent_dim == 0 || hidden_dim == 0)
      fail("latent_dim and hidden_dim must be positive");
  }
};

inline nlohmann::json config_to_json(const TrainConfig &c) {
  return {
      {"alpha", c.alpha},
      {"delta", c.delta},
      {"xi1", c.xi1},
      {"xi2", c.xi2},
      {"beta", c.beta},
      {"epsilon", c.epsilon},
      {"heads", c.heads},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"seed", c.seed},
      {"mode", std::string(mode_name(c.mode))},
      {"sass_on", c.sass_on},
      {"sig_on", c.sig_on},
      {"sal_on", c.sal_on},
      {"occlusion_ratio", c.occlusion_ratio},
      {"occlusion_mode", std::string(occlusion_mode_name(c.occlusion_mode))},
      {"latent_dim", c.latent_dim},
      {"hidden_dim", c.hidden_dim},
  };
}

namespace detail {

inline bool parse_bool_text(std::string_view s) {
  if (s == "true" || s == "1" || s == "on")
    return true;
  if (s == "false" || s == "0" || s == "off")
    return false;
  throw ValueError("expected a boolean, got '" + std::string(s) + "'");
}

template <class T> T json_get(const nlohmann::json &v, const std::string &key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (v.is_string())
        return parse_bool_text(v.get<std::string>());
      if (!v.is_boolean())
        throw ParseError(key, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned())
        throw ParseError(key, "expected a non-negative integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number())
        throw ParseError(key, "expected a number");
      return v.get<T>();
    } else {
      if (!v.is_string())
        throw ParseError(key, "expected a string");
      return v.get<T>();
    }
  } catch (const ValueError &e) {
    throw ParseError(key, e.what());
  }
}

} // namespace detail

/// Applies one flat key; unknown keys are a ParseError.
inline void set_config_value(TrainConfig &c, const std::string &key, const nlohmann::json &v) {
  using detail::json_get;
  if (key == "alpha")
    c.alpha = json_get<double>(v, key);
  else if (key == "delta")
    c.delta = json_get<double>(v, key);
  else if (key == "xi1")
    c.xi1 = json_get<double>(v, key);
  else if (key == "xi2")
    c.xi2 = json_get<double>(v, key);
  else if (key == "beta")
    c.beta = json_get<double>(v, key);
  else if (key == "epsilon")
    c.epsilon = json_get<double>(v, key);
  else if (key == "heads")
    c.heads = json_get<std::size_t>(v, key);
  else if (key == "epochs")
    c.epochs = json_get<std::size_t>(v, key);
  else if (key == "batch_size")
    c.batch_size = json_get<std::size_t>(v, key);
  else if (key == "learning_rate")
    c.learning_rate = json_get<double>(v, key);
  else if (key == "seed")
    c.seed = json_get<std::uint64_t>(v, key);
  else if (key == "mode") {
    try {
      c.mode = parse_mode(json_get<std::string>(v, key));
    } catch (const ValueError &e) {
      throw ParseError(key, e.what());
    }
  } else if (key == "sass_on")
    c.sass_on = json_get<bool>(v, key);
  else if (key == "sig_on")
    c.sig_on = json_get<bool>(v, key);
  else if (key == "sal_on")
    c.sal_on = json_get<bool>(v, key);
  else if (key == "occlusion_ratio")
    c.occlusion_ratio = json_get<double>(v, key);
  else if (key == "occlusion_mode") {
    try {
      c.occlusion_mode = parse_occlusion_mode(json_get<std::string>(v, key));
    } catch (const ValueError &e) {
      throw ParseError(key, e.what());
    }
  } else if (key == "latent_dim")
    c.latent_dim = json_get<std::size_t>(v, key);
  else if (key == "hidden_dim")
    c.hidden_dim = json_get<std::size_t>(v, key);
  else
    throw ParseError(key, "unknown config key");
}

inline TrainConfig config_from_json(const nlohmann::json &j, TrainConfig base = {}) {
  if (!j.is_object())
    throw ParseError("<root>", "config must be a JSON object");
  for (const auto &[key, value] : j.items())
    set_config_value(base, key, value);
  return base;
}

/// Parses a command-line override value. Text that is valid JSON (numbers,
/// booleans) is used as such, anything else as a string.
inline nlohmann::json override_value(const std::string &text) {
  auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (parsed.is_discarded() || parsed.is_object() || parsed.is_array())
    return text;
  return parsed;
}

inline BackboneDims backbone_dims(const TrainConfig &c, const Dataset &d) {
  BackboneDims dims;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    dims.raw[m] = d.features[m].cols();
    dims.latent[m] = c.latent_dim;
  }
  dims.hidden = c.hidden_dim;
  return dims;
}

} // namespace msmix
