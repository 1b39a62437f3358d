#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>

#include "btl/json_io.hpp"
#include "btl/reward.hpp"

namespace btl {

// Action-type exact match.
int metric_type(const ActionCall& pred, const ActionCall& gt);

// Click accuracy; nullopt when the ground truth is not Tap/LongPress (the step
// is outside the GR denominator). A prediction without a position scores 0.
std::optional<int> metric_gr(const std::optional<ActionCall>& pred, const GroundTruthStep& gt,
                             const RewardConfig& cfg = {});

// Step success: identical to reward_link.
int metric_sr(const ActionCall& pred, const GroundTruthStep& gt, const RewardConfig& cfg = {});

// Boundary inclusive.
int grounding_accuracy(const Point& pred_point, const BBox& gt_bbox);

struct EvalReport {
  std::size_t n_steps = 0;
  std::size_t type_correct = 0;
  std::size_t sr_correct = 0;
  std::size_t gr_correct = 0;
  std::size_t gr_steps = 0;
  std::size_t grounding_correct = 0;
  std::size_t grounding_steps = 0;
  std::size_t format_failures = 0;
  // gt action type -> predicted type (or "invalid") -> count
  std::map<std::string, std::map<std::string, std::size_t>> confusion;

  double type_acc() const;
  double sr_acc() const;
  std::optional<double> gr_acc() const;
  std::optional<double> grounding_acc() const;

  // Adds one scored step. `completion` is the raw model output.
  void add(const GroundTruthStep& gt, std::string_view completion, bool grounding_task, const RewardConfig& cfg);

  OrderedJson to_json() const;
};

// Joins dataset and predictions by step id and aggregates the metrics.
// Throws JoinError on unmatched or duplicate ids, Error on an empty dataset
// or unreadable files.
EvalReport evaluate(const std::string& dataset_path, const std::string& predictions_path,
                    const RewardConfig& cfg = {});

}  // namespace btl
