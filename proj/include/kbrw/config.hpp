#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "kbrw/models.hpp"

namespace kbrw {

/// Parsed experiment configuration. Command-specific sections stay as JSON
/// and are read by the command that owns them.
struct ExperimentConfig {
  nlohmann::json raw;
  std::optional<OffspringLaw> law;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out;
  std::optional<std::size_t> escape_cap;
};

/// Law objects:
///   {"type": "binary_bernoulli", "p": 0.3}
///   {"type": "product", "offspring": [[k, prob], ...],
///    "step": {"type": "discrete", "atoms": [[value, prob], ...]}
///          | {"type": "gaussian", "mean": m, "stddev": s}}
///   {"type": "explicit", "outcomes": [{"displacements": [...], "prob": q}, ...]}
/// Throws ValidationError on schema errors (not on model assumptions).
OffspringLaw parse_law(const nlohmann::json& j);
nlohmann::json law_to_json(const OffspringLaw& law);

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// FNV-1a over the compact dump of the config, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

}  // namespace kbrw
