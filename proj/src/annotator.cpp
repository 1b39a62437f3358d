#include "btl/annotator.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <ostream>
#include <set>
#include <thread>
#include <unordered_map>

#include "btl/errors.hpp"
#include "btl/json_io.hpp"

namespace btl {

std::string_view to_string(Provenance p) { return p == Provenance::Model ? "model" : "heuristic"; }

void AnnotationRequest::validate(std::size_t lambda_max) const {
  if (lambda < 1 || lambda > lambda_max)
    throw InvariantError("lambda must lie in 1.." + std::to_string(lambda_max) + ", got " + std::to_string(lambda));
  std::set<std::int64_t> ids;
  for (const auto& e : elements) {
    if (!ids.insert(e.id).second) throw InvariantError("duplicate element id " + std::to_string(e.id));
    if (!e.bbox.valid()) throw InvariantError("invalid bbox for element " + std::to_string(e.id));
  }
}

const ConceptLexicon& default_concept_lexicon() {
  static const ConceptLexicon lexicon = [] {
    ConceptLexicon lex;
    auto add = [&](std::initializer_list<const char*> keys, std::initializer_list<const char*> hits) {
      for (const char* k : keys) lex[k].insert(lex[k].end(), hits.begin(), hits.end());
    };
    add({"gps", "locate", "location", "navigate", "navigation", "directions", "route", "nearby", "map"},
        {"map", "maps", "navigation"});
    add({"call", "dial"}, {"phone", "dialer", "call"});
    add({"sms", "message", "messages", "text"}, {"messages", "messaging", "sms"});
    add({"photo", "photos", "picture", "pictures", "selfie"}, {"camera", "gallery", "photos"});
    add({"email", "mail", "inbox"}, {"gmail", "mail", "email", "inbox"});
    add({"browse", "web", "website"}, {"chrome", "browser"});
    add({"song", "songs", "music", "listen", "radio"}, {"music", "radio", "player"});
    add({"alarm", "timer", "stopwatch"}, {"clock", "alarm"});
    add({"schedule", "event", "meeting", "appointment"}, {"calendar"});
    add({"ride", "taxi", "cab"}, {"lyft", "uber"});
    add({"buy", "shop", "purchase"}, {"shopping", "store", "shop"});
    add({"forecast", "temperature"}, {"weather"});
    return lex;
  }();
  return lexicon;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<RankedElement> heuristic_rank(std::span<const UiElement> elements, std::string_view instruction,
                                          const HeuristicOptions& opts) {
  const auto words = tokenize(instruction);
  const std::set<std::string, std::less<>> query(words.begin(), words.end());

  std::vector<RankedElement> ranked;
  ranked.reserve(elements.size());
  for (const auto& e : elements) {
    auto tokens = tokenize(e.caption);
    const auto type_tokens = tokenize(e.elem_type);
    tokens.insert(tokens.end(), type_tokens.begin(), type_tokens.end());
    const std::set<std::string, std::less<>> element_tokens(tokens.begin(), tokens.end());

    std::size_t hits = 0;
    for (const auto& q : query) {
      bool hit = element_tokens.contains(q);
      if (!hit) {
        if (const auto it = opts.lexicon.find(q); it != opts.lexicon.end())
          hit = std::any_of(it->second.begin(), it->second.end(),
                            [&](const std::string& t) { return element_tokens.contains(t); });
      }
      hits += hit ? 1 : 0;
    }
    double score = query.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(query.size());
    if (hits > 0 && e.interactivity) score += opts.interactive_bonus;
    ranked.push_back({e.id, score});
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedElement& a, const RankedElement& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  return ranked;
}

RankingReply HeuristicRanker::rank(const AnnotationRequest& req) {
  RankingReply reply;
  for (const auto& r : heuristic_rank(req.elements, req.instruction, opts_))
    if (r.score > 0.0) reply.ranked_ids.push_back(r.id);
  return reply;
}

AnnotationResult filter_rois(const AnnotationRequest& req, Ranker& ranker) {
  RankingReply reply = ranker.rank(req);

  std::unordered_map<std::int64_t, const UiElement*> by_id;
  for (const auto& e : req.elements) by_id.emplace(e.id, &e);

  AnnotationResult result;
  result.provenance = ranker.provenance();
  result.raw_model_reply = std::move(reply.raw_reply);
  std::set<std::int64_t> taken;
  for (std::int64_t id : reply.ranked_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ModelUnavailable("ranker returned unknown element id " + std::to_string(id));
    if (!taken.insert(id).second) continue;
    if (result.roi.size() == req.lambda) break;
    const UiElement& e = *it->second;
    result.roi.push_back({static_cast<std::int64_t>(result.roi.size() + 1), e.bbox,
                          e.interactivity ? Caption::Dynamic : Caption::Static});
    result.source_ids.push_back(e.id);
  }
  return result;
}

AnnotationRequest request_from_json(std::string_view line, std::size_t lambda_max) {
  const Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("record", "not a JSON object");

  AnnotationRequest req;
  req.lambda = lambda_max;
  try {
    for (const auto& e : j.at("elements")) {
      UiElement el;
      el.id = e.at("id").get<std::int64_t>();
      el.bbox = bbox_from_json(e.at("bbox"));
      el.elem_type = e.value("type", std::string{});
      el.caption = e.value("caption", std::string{});
      el.interactivity = e.value("interactivity", false);
      req.elements.push_back(std::move(el));
    }
    req.instruction = j.at("instruction").get<std::string>();
    if (j.contains("history")) req.history = j.at("history").get<std::vector<std::string>>();
    if (j.contains("lambda")) req.lambda = j.at("lambda").get<std::size_t>();
    req.screen_ref = j.value("screen_ref", std::string{});
  } catch (const Json::exception& e) {
    throw ParseError("record", e.what());
  }
  req.validate(lambda_max);
  return req;
}

namespace {

struct LineOutcome {
  std::optional<std::string> output;
  bool fell_back = false;
  std::string error;
};

LineOutcome annotate_line(const std::string& line, const AnnotateConfig& cfg, HeuristicRanker& heuristic) {
  LineOutcome out;
  try {
    const AnnotationRequest req = request_from_json(line, cfg.lambda_max);
    AnnotationResult result;
    if (cfg.model) {
      try {
        result = filter_rois(req, *cfg.model);
      } catch (const ModelUnavailable&) {
        if (!cfg.fallback) throw;
        result = filter_rois(req, heuristic);
        out.fell_back = true;
      }
    } else {
      result = filter_rois(req, heuristic);
    }

    OrderedJson record = OrderedJson::parse(line);
    OrderedJson roi = OrderedJson::array();
    for (std::size_t k = 0; k < result.roi.size(); ++k) {
      roi.push_back({{"id", result.roi[k].id},
                     {"bbox", bbox_to_json(result.roi[k].bbox)},
                     {"caption", std::string(to_string(result.roi[k].caption))},
                     {"source_id", result.source_ids[k]}});
    }
    record["roi"] = std::move(roi);
    record["blink"] = serialize_blink(result.roi);
    record["provenance"] = std::string(to_string(result.provenance));
    if (result.raw_model_reply) record["raw_model_reply"] = *result.raw_model_reply;
    out.output = record.dump(-1, ' ', false, OrderedJson::error_handler_t::replace);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

AnnotationSummary annotate_dataset(const std::string& input_path, const std::string& output_path,
                                   const AnnotateConfig& cfg) {
  std::ifstream in(input_path);
  if (!in) throw Error("cannot open input " + input_path);
  std::ofstream out(output_path, std::ios::trunc);
  if (!out) throw Error("cannot open output " + output_path);

  const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
  const std::size_t batch_size = jobs * 64;
  HeuristicRanker heuristic(cfg.heuristic);
  AnnotationSummary summary;
  std::size_t line_no = 0;

  std::vector<std::string> batch;
  std::vector<std::size_t> batch_lines;
  std::vector<LineOutcome> outcomes;
  auto flush = [&] {
    outcomes.assign(batch.size(), {});
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < batch.size(); i = next++) outcomes[i] = annotate_line(batch[i], cfg, heuristic);
    };
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 1; t < std::min(jobs, batch.size()); ++t) pool.emplace_back(worker);
      worker();
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ++summary.processed;
      if (outcomes[i].output) {
        out << *outcomes[i].output << '\n';
        ++summary.succeeded;
        if (outcomes[i].fell_back) ++summary.fell_back;
      } else {
        ++summary.failed;
        if (cfg.log) *cfg.log << "annotate: line " << batch_lines[i] << ": " << outcomes[i].error << '\n';
      }
    }
    batch.clear();
    batch_lines.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    batch.push_back(std::move(line));
    batch_lines.push_back(line_no);
    if (batch.size() == batch_size) flush();
  }
  if (!batch.empty()) flush();
  return summary;
}

}  // namespace btl
