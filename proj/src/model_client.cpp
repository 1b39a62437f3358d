#include "btl/model_client.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "btl/errors.hpp"
#include "httplib.h"

namespace btl {

void ModelEndpointConfig::validate() const {
  if (base_url.empty()) throw ConfigError("endpoint base_url is empty");
  if (!(timeout > 0.0)) throw ConfigError("endpoint timeout must be positive");
  if (max_retries < 0) throw ConfigError("endpoint max_retries must be >= 0");
  if (!(backoff >= 0.0)) throw ConfigError("endpoint backoff must be >= 0");
}

Json make_ranking_request(const AnnotationRequest& req) {
  Json elements = Json::array();
  for (const auto& e : req.elements) {
    elements.push_back({{"id", e.id},
                        {"bbox", {e.bbox.x0, e.bbox.y0, e.bbox.x1, e.bbox.y1}},
                        {"type", e.elem_type},
                        {"caption", e.caption},
                        {"interactivity", e.interactivity}});
  }
  return {{"elements", std::move(elements)},
          {"instruction", req.instruction},
          {"history", req.history},
          {"lambda", req.lambda}};
}

std::vector<std::int64_t> parse_ranking_reply(std::string_view body) {
  const Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ModelUnavailable("model reply is not a JSON object");
  const auto it = j.find("ranked_ids");
  if (it == j.end() || !it->is_array()) throw ModelUnavailable("model reply lacks a ranked_ids array");
  std::vector<std::int64_t> ids;
  for (const auto& v : *it) {
    if (!v.is_number_integer()) throw ModelUnavailable("ranked_ids must hold integers");
    ids.push_back(v.get<std::int64_t>());
  }
  return ids;
}

ModelRanker::ModelRanker(ModelEndpointConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto scheme_end = cfg_.base_url.find("://");
  if (scheme_end == std::string::npos || cfg_.base_url.substr(0, scheme_end) != "http")
    throw ConfigError("endpoint base_url must start with http://");
  const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
  origin_ = cfg_.base_url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : cfg_.base_url.substr(path_start);
}

RankingReply ModelRanker::rank(const AnnotationRequest& req) {
  const std::string body = make_ranking_request(req).dump();
  httplib::Headers headers;
  if (!cfg_.auth_token_env_var.empty()) {
    if (const char* token = std::getenv(cfg_.auth_token_env_var.c_str()); token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  const auto seconds = static_cast<time_t>(cfg_.timeout);
  const auto micros = static_cast<time_t>(std::lround((cfg_.timeout - static_cast<double>(seconds)) * 1e6));
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double wait = cfg_.backoff * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    httplib::Client client(origin_);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    const auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return {parse_ranking_reply(res->body), res->body};
    last_error = "HTTP " + std::to_string(res->status);
    // Client errors other than throttling will not improve on retry.
    if (res->status >= 400 && res->status < 500 && res->status != 429) break;
  }
  throw ModelUnavailable("model endpoint " + cfg_.base_url + " unavailable: " + last_error);
}

}  // namespace btl
