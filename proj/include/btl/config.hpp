#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "btl/grpo.hpp"
#include "btl/json_io.hpp"
#include "btl/model_client.hpp"
#include "btl/reward.hpp"

namespace btl {

struct ToolConfig {
  double tau = kDefaultTau;
  std::size_t lambda_max = kDefaultLambdaMax;
  double beta = 0.04;
  double coordinate_tolerance = 0.14;
  std::string allocation = "linear";
  bool fallback_ranker = true;
  std::size_t jobs = 1;
  std::optional<ModelEndpointConfig> endpoint;

  // Throws ConfigError.
  void validate() const;

  RewardConfig reward_config() const;
  GrpoConfig grpo_config() const;
  OrderedJson to_json() const;
};

// Values given on the command line; unset fields fall through to the file.
struct ConfigOverrides {
  std::optional<double> tau;
  std::optional<std::size_t> lambda_max;
  std::optional<double> beta;
  std::optional<std::string> endpoint_url;
  std::optional<bool> fallback_ranker;
  std::optional<std::size_t> jobs;
};

// Applies the keys present in `j` on top of `cfg`. Unknown keys are rejected.
void apply_config_json(ToolConfig& cfg, const Json& j);

// Built-in defaults, then the JSON file (if any), then overrides. Throws
// ConfigError for unreadable or invalid input.
ToolConfig resolve_config(const std::optional<std::string>& config_path, const ConfigOverrides& overrides);

}  // namespace btl
