#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "btl/format.hpp"
#include "btl/geometry.hpp"
#include "btl/types.hpp"

namespace btl {

struct RankedRoi {
  BBox bbox;
  int priority = 1;  // 1 = most relevant

  bool operator==(const RankedRoi&) const = default;
};

// One annotated step: instruction, history, the ground-truth action and the
// priority-ranked ROIs the agent is expected to attend to.
struct GroundTruthStep {
  std::string id;
  std::string instruction;
  std::vector<std::string> history;
  ActionCall gt_action;
  std::vector<RankedRoi> gt_rois;  // ordered by priority, ranks 1..n
  std::optional<BBox> gt_element_bbox;
  Eigen::Vector2d screen_size{0.0, 0.0};

  // Throws InvariantError on rank gaps, out-of-screen target boxes or an
  // invalid ground-truth action.
  void validate() const;

  std::vector<BBox> roi_boxes() const;
};

// Maps (rank, total) to the reward for hitting that ROI.
using AllocationFn = std::function<double(int rank, int total)>;

// (total - rank + 1) / total. Throws DomainError unless 1 <= rank <= total.
double allocation_s(int rank, int total);

struct RewardConfig {
  double tau = kDefaultTau;
  // Point-vs-point tolerance for coordinate actions, fraction of screen width.
  double coordinate_tolerance = 0.14;
  AllocationFn allocation = allocation_s;
  FormatOptions format;
  // Actions that carry no screen coordinate; an empty blink is correct for them.
  std::set<ActionType> non_interactive = {ActionType::Back, ActionType::Home, ActionType::Swipe, ActionType::Type};
};

struct RewardBreakdown {
  double r_format = 0.0;
  double r_blink = 0.0;
  double r_link = 0.0;
  double r_total = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

double reward_format(std::string_view raw, const RewardConfig& cfg = {});

double reward_blink(const BtlOutput& output, const GroundTruthStep& gt, const RewardConfig& cfg = {});

// Coordinate predicate shared by the link reward and the GR metric: inside the
// target element box when known, otherwise within tolerance of the gt point.
bool position_matches(const Point& predicted, const GroundTruthStep& gt, const RewardConfig& cfg = {});

// f_args: argument predicate for a prediction whose type already matches.
bool arguments_match(const ActionCall& pred, const GroundTruthStep& gt, const RewardConfig& cfg = {});

double reward_link(const ActionCall& pred, const GroundTruthStep& gt, const RewardConfig& cfg = {});

// Format-gated sum of the three components. Never throws on `raw`.
RewardBreakdown reward_total(std::string_view raw, const GroundTruthStep& gt, const RewardConfig& cfg = {});

}  // namespace btl
