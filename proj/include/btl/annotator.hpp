#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "btl/format.hpp"
#include "btl/types.hpp"

namespace btl {

// One element from a parsed screenshot: id, box, type, caption, interactivity.
struct UiElement {
  std::int64_t id = 0;
  BBox bbox;
  std::string elem_type;
  std::string caption;
  bool interactivity = false;
};

struct AnnotationRequest {
  std::vector<UiElement> elements;
  std::string instruction;
  std::vector<std::string> history;
  std::size_t lambda = kDefaultLambdaMax;
  std::string screen_ref;

  // Throws InvariantError on duplicate ids, invalid boxes or lambda outside
  // 1..lambda_max.
  void validate(std::size_t lambda_max = kDefaultLambdaMax) const;
};

enum class Provenance { Model, Heuristic };
std::string_view to_string(Provenance p);

struct AnnotationResult {
  // Priority order, ids renumbered 1..k.
  std::vector<BlinkElement> roi;
  // Original element id behind each roi entry.
  std::vector<std::int64_t> source_ids;
  Provenance provenance = Provenance::Heuristic;
  std::optional<std::string> raw_model_reply;
};

struct RankedElement {
  std::int64_t id = 0;
  double score = 0.0;

  bool operator==(const RankedElement&) const = default;
};

// Instruction token -> element tokens that count as a hit for it. Lets an
// instruction about "gps" land on an element captioned "Maps".
using ConceptLexicon = std::map<std::string, std::vector<std::string>, std::less<>>;
const ConceptLexicon& default_concept_lexicon();

struct HeuristicOptions {
  double interactive_bonus = 0.1;
  ConceptLexicon lexicon = default_concept_lexicon();
};

// Lowercased ASCII alphanumeric runs.
std::vector<std::string> tokenize(std::string_view text);

// score = |instruction tokens hit by caption+type tokens| / |instruction tokens|,
// plus the interactive bonus when the overlap is non-zero. Sorted by score
// descending, then id ascending.
std::vector<RankedElement> heuristic_rank(std::span<const UiElement> elements, std::string_view instruction,
                                          const HeuristicOptions& opts = {});

struct RankingReply {
  std::vector<std::int64_t> ranked_ids;
  std::optional<std::string> raw_reply;
};

class Ranker {
 public:
  virtual ~Ranker() = default;
  virtual RankingReply rank(const AnnotationRequest& req) = 0;
  virtual Provenance provenance() const = 0;
};

// Offline ranker: heuristic_rank, keeping only elements with positive score.
class HeuristicRanker final : public Ranker {
 public:
  explicit HeuristicRanker(HeuristicOptions opts = {}) : opts_(std::move(opts)) {}
  RankingReply rank(const AnnotationRequest& req) override;
  Provenance provenance() const override { return Provenance::Heuristic; }

 private:
  HeuristicOptions opts_;
};

// Top-lambda elements from the ranker as blink elements. Throws
// ModelUnavailable when the ranker fails or names ids not in the request.
AnnotationResult filter_rois(const AnnotationRequest& req, Ranker& ranker);

struct AnnotationSummary {
  std::size_t processed = 0;
  std::size_t succeeded = 0;  // records written, fallbacks included
  std::size_t fell_back = 0;
  std::size_t failed = 0;
};

struct AnnotateConfig {
  std::size_t lambda_max = kDefaultLambdaMax;
  // Primary ranker; nullptr means heuristic only.
  Ranker* model = nullptr;
  bool fallback = true;
  HeuristicOptions heuristic;
  std::size_t jobs = 1;
  std::ostream* log = nullptr;
};

AnnotationRequest request_from_json(std::string_view line, std::size_t lambda_max);

// Line-delimited JSON in, one annotated line out per good record, in input
// order. Bad records are logged and counted, never fatal. Throws Error only
// when a file cannot be opened.
AnnotationSummary annotate_dataset(const std::string& input_path, const std::string& output_path,
                                   const AnnotateConfig& cfg);

}  // namespace btl
