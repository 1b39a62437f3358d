#include "btl/reward.hpp"

#include <algorithm>

#include "btl/errors.hpp"

namespace btl {

namespace {

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\n\r\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(ws) - first + 1);
}

}  // namespace

void GroundTruthStep::validate() const {
  if (!gt_action.valid()) throw InvariantError("step " + id + ": gt_action has the wrong argument set");
  for (std::size_t i = 0; i < gt_rois.size(); ++i) {
    if (gt_rois[i].priority != static_cast<int>(i) + 1)
      throw InvariantError("step " + id + ": roi priorities must be 1..n in order");
    if (!gt_rois[i].bbox.valid()) throw InvariantError("step " + id + ": invalid roi bbox");
  }
  if (gt_element_bbox) {
    if (!gt_element_bbox->valid()) throw InvariantError("step " + id + ": invalid gt_element_bbox");
    if (screen_size.x() > 0 && screen_size.y() > 0 &&
        (gt_element_bbox->x1 > screen_size.x() || gt_element_bbox->y1 > screen_size.y()))
      throw InvariantError("step " + id + ": gt_element_bbox outside the screen");
  }
}

std::vector<BBox> GroundTruthStep::roi_boxes() const {
  std::vector<BBox> boxes;
  boxes.reserve(gt_rois.size());
  for (const auto& roi : gt_rois) boxes.push_back(roi.bbox);
  return boxes;
}

double allocation_s(int rank, int total) {
  if (total < 1 || rank < 1 || rank > total)
    throw DomainError("allocation_s: rank " + std::to_string(rank) + " outside 1.." + std::to_string(total));
  return static_cast<double>(total - rank + 1) / static_cast<double>(total);
}

double reward_format(std::string_view raw, const RewardConfig& cfg) {
  return check_template(raw) && check_content(raw, cfg.format) ? 1.0 : 0.0;
}

double reward_blink(const BtlOutput& output, const GroundTruthStep& gt, const RewardConfig& cfg) {
  const bool no_preds = output.blink.empty();
  const bool no_gts = gt.gt_rois.empty();
  if (no_preds) return (no_gts || cfg.non_interactive.contains(gt.gt_action.function)) ? 1.0 : 0.0;
  if (no_gts) return 0.0;

  std::vector<BBox> preds;
  preds.reserve(output.blink.size());
  for (const auto& e : output.blink) preds.push_back(e.bbox);
  const auto gts = gt.roi_boxes();

  const Matching m = hungarian_match(preds, gts, cfg.tau);
  const int total = static_cast<int>(gts.size());
  double best = 0.0;
  for (std::size_t y : m.matched_gt) best = std::max(best, cfg.allocation(gt.gt_rois[y].priority, total));
  return best;
}

bool position_matches(const Point& predicted, const GroundTruthStep& gt, const RewardConfig& cfg) {
  if (gt.gt_element_bbox) return gt.gt_element_bbox->contains(predicted);
  if (!gt.gt_action.position) return false;
  return (predicted - *gt.gt_action.position).norm() <= cfg.coordinate_tolerance * gt.screen_size.x();
}

bool arguments_match(const ActionCall& pred, const GroundTruthStep& gt, const RewardConfig& cfg) {
  switch (gt.gt_action.function) {
    case ActionType::Back:
    case ActionType::Home:
      return true;
    case ActionType::Swipe:
      return pred.direction && pred.direction == gt.gt_action.direction;
    case ActionType::Type:
      return pred.text && gt.gt_action.text && trim(*pred.text) == trim(*gt.gt_action.text);
    case ActionType::Tap:
    case ActionType::LongPress:
      return pred.position && position_matches(*pred.position, gt, cfg);
  }
  return false;
}

double reward_link(const ActionCall& pred, const GroundTruthStep& gt, const RewardConfig& cfg) {
  if (pred.function != gt.gt_action.function) return 0.0;
  return arguments_match(pred, gt, cfg) ? 1.0 : 0.0;
}

RewardBreakdown reward_total(std::string_view raw, const GroundTruthStep& gt, const RewardConfig& cfg) {
  RewardBreakdown out;
  BtlOutput parsed;
  try {
    parsed = parse_btl(raw, cfg.format);
  } catch (const ParseError&) {
    return out;
  }
  out.r_format = 1.0;
  out.r_blink = reward_blink(parsed, gt, cfg);
  out.r_link = reward_link(parsed.link.front().action, gt, cfg);
  out.r_total = out.r_format + out.r_blink + out.r_link;
  return out;
}

}  // namespace btl
