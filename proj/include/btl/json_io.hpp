#pragma once

#include "json.hpp"

#include <string>

#include "btl/reward.hpp"
#include "btl/types.hpp"

namespace btl {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Strict decoding of `{"function": ..., ...}`: unknown keys, missing or extra
// arguments and wrong value types are rejected with ParseError("action", ...).
ActionCall action_from_json(const Json& j);
OrderedJson action_to_json(const ActionCall& action);

// `[x0, y0, x1, y1]`, validated against the BBox invariants.
BBox bbox_from_json(const Json& j);
OrderedJson bbox_to_json(const BBox& box);

// `[x, y]`, finite and non-negative.
Point point_from_json(const Json& j);

// Ground-truth step record:
//   {"id", "instruction", "history", "gt_action", "gt_rois", "gt_element_bbox"?, "screen_size"}
// gt_rois is either a list of boxes in priority order or a list of
// {"bbox", "priority"} objects. Throws ParseError or InvariantError.
GroundTruthStep step_from_json(const Json& j);

}  // namespace btl
