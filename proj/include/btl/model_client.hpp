#pragma once

#include <string>
#include <string_view>

#include "btl/annotator.hpp"
#include "btl/json_io.hpp"

namespace btl {

struct ModelEndpointConfig {
  std::string base_url;             // http://host[:port][/path]
  std::string auth_token_env_var;   // bearer token source; empty = no auth
  double timeout = 30.0;            // seconds, per attempt
  int max_retries = 2;
  double backoff = 0.5;             // seconds; doubles after every failed attempt

  void validate() const;
};

// Body of the ranking call: {elements, instruction, history, lambda}.
Json make_ranking_request(const AnnotationRequest& req);

// Expects {"ranked_ids": [int, ...]}. Throws ModelUnavailable otherwise.
std::vector<std::int64_t> parse_ranking_reply(std::string_view body);

// Ranks elements by POSTing the request to an analysis-model server. Safe to
// share between threads; each call opens its own connection.
class ModelRanker final : public Ranker {
 public:
  explicit ModelRanker(ModelEndpointConfig cfg);

  RankingReply rank(const AnnotationRequest& req) override;
  Provenance provenance() const override { return Provenance::Model; }

 private:
  ModelEndpointConfig cfg_;
  std::string origin_;
  std::string path_;
};

}  // namespace btl
