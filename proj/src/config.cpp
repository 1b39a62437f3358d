#include "btl/config.hpp"

#include <fstream>
#include <set>

#include "btl/errors.hpp"

namespace btl {

void ToolConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (lambda_max < 1) throw ConfigError("lambda must be >= 1");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(coordinate_tolerance > 0.0 && coordinate_tolerance < 1.0))
    throw ConfigError("coordinate_tolerance must lie in (0, 1)");
  if (allocation != "linear") throw ConfigError("unknown allocation \"" + allocation + "\"");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (endpoint) endpoint->validate();
}

RewardConfig ToolConfig::reward_config() const {
  RewardConfig cfg;
  cfg.tau = tau;
  cfg.coordinate_tolerance = coordinate_tolerance;
  cfg.allocation = allocation_s;
  cfg.format.lambda_max = lambda_max;
  return cfg;
}

GrpoConfig ToolConfig::grpo_config() const {
  GrpoConfig cfg;
  cfg.beta = beta;
  return cfg;
}

OrderedJson ToolConfig::to_json() const {
  OrderedJson j{{"tau", tau},
                {"lambda_max", lambda_max},
                {"beta", beta},
                {"coordinate_tolerance", coordinate_tolerance},
                {"allocation", allocation},
                {"fallback_ranker", fallback_ranker},
                {"jobs", jobs}};
  if (endpoint) {
    j["endpoint"] = {{"base_url", endpoint->base_url},
                     {"auth_token_env_var", endpoint->auth_token_env_var},
                     {"timeout", endpoint->timeout},
                     {"max_retries", endpoint->max_retries},
                     {"backoff", endpoint->backoff}};
  }
  return j;
}

void apply_config_json(ToolConfig& cfg, const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {"tau",        "lambda_max",      "beta", "coordinate_tolerance",
                                              "allocation", "fallback_ranker", "jobs", "endpoint"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw ConfigError("unknown config key \"" + key + "\"");
      if (key == "tau") cfg.tau = value.get<double>();
      else if (key == "lambda_max") cfg.lambda_max = value.get<std::size_t>();
      else if (key == "beta") cfg.beta = value.get<double>();
      else if (key == "coordinate_tolerance") cfg.coordinate_tolerance = value.get<double>();
      else if (key == "allocation") cfg.allocation = value.get<std::string>();
      else if (key == "fallback_ranker") cfg.fallback_ranker = value.get<bool>();
      else if (key == "jobs") cfg.jobs = value.get<std::size_t>();
      else if (key == "endpoint") {
        if (value.is_null()) {
          cfg.endpoint.reset();
          continue;
        }
        ModelEndpointConfig ep = cfg.endpoint.value_or(ModelEndpointConfig{});
        ep.base_url = value.value("base_url", ep.base_url);
        ep.auth_token_env_var = value.value("auth_token_env_var", ep.auth_token_env_var);
        ep.timeout = value.value("timeout", ep.timeout);
        ep.max_retries = value.value("max_retries", ep.max_retries);
        ep.backoff = value.value("backoff", ep.backoff);
        cfg.endpoint = ep;
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

ToolConfig resolve_config(const std::optional<std::string>& config_path, const ConfigOverrides& overrides) {
  ToolConfig cfg;
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw ConfigError("cannot open config " + *config_path);
    const Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config " + *config_path + " is not valid JSON");
    apply_config_json(cfg, j);
  }
  if (overrides.tau) cfg.tau = *overrides.tau;
  if (overrides.lambda_max) cfg.lambda_max = *overrides.lambda_max;
  if (overrides.beta) cfg.beta = *overrides.beta;
  if (overrides.fallback_ranker) cfg.fallback_ranker = *overrides.fallback_ranker;
  if (overrides.jobs) cfg.jobs = *overrides.jobs;
  if (overrides.endpoint_url) {
    ModelEndpointConfig ep = cfg.endpoint.value_or(ModelEndpointConfig{});
    ep.base_url = *overrides.endpoint_url;
    cfg.endpoint = ep;
  }
  cfg.validate();
  return cfg;
}

}  // namespace btl
