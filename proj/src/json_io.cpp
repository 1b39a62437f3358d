#include "btl/json_io.hpp"

#include <cmath>
#include <algorithm>
#include <set>

#include "btl/errors.hpp"

namespace btl {

namespace {

double finite_number(const Json& j, const char* what, const std::string& location) {
  if (!j.is_number()) throw ParseError(location, std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(location, std::string(what) + " must be finite");
  return v;
}

}  // namespace

Point point_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("action", "position must be [x, y]");
  Point p(finite_number(j[0], "x", "action"), finite_number(j[1], "y", "action"));
  if (p.x() < 0.0 || p.y() < 0.0) throw ParseError("action", "position must be non-negative");
  return p;
}

ActionCall action_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("action", "Action must be a JSON object");
  const auto fn = j.find("function");
  if (fn == j.end() || !fn->is_string()) throw ParseError("action", "missing string field \"function\"");
  const auto type = action_type_from_string(fn->get_ref<const std::string&>());
  if (!type) throw ParseError("action", "unknown function \"" + fn->get<std::string>() + "\"");

  ActionCall call;
  call.function = *type;
  std::set<std::string> allowed = {"function"};
  if (takes_position(*type)) {
    allowed.insert("position");
    const auto it = j.find("position");
    if (it == j.end()) throw ParseError("action", std::string(to_string(*type)) + " requires \"position\"");
    call.position = point_from_json(*it);
  } else if (*type == ActionType::Type) {
    allowed.insert("text");
    const auto it = j.find("text");
    if (it == j.end() || !it->is_string()) throw ParseError("action", "Type requires string \"text\"");
    call.text = it->get<std::string>();
  } else if (*type == ActionType::Swipe) {
    allowed.insert("direction");
    const auto it = j.find("direction");
    if (it == j.end() || !it->is_string()) throw ParseError("action", "Swipe requires string \"direction\"");
    call.direction = direction_from_string(it->get_ref<const std::string&>());
    if (!call.direction) throw ParseError("action", "unknown direction \"" + it->get<std::string>() + "\"");
  }
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key))
      throw ParseError("action", "unexpected argument \"" + key + "\" for " + std::string(to_string(*type)));
  return call;
}

OrderedJson action_to_json(const ActionCall& action) {
  OrderedJson j;
  j["function"] = std::string(to_string(action.function));
  if (action.position) j["position"] = {action.position->x(), action.position->y()};
  if (action.text) j["text"] = *action.text;
  if (action.direction) j["direction"] = std::string(to_string(*action.direction));
  return j;
}

BBox bbox_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("bbox", "bbox must be [x0, y0, x1, y1]");
  BBox box{finite_number(j[0], "x0", "bbox"), finite_number(j[1], "y0", "bbox"), finite_number(j[2], "x1", "bbox"),
           finite_number(j[3], "y1", "bbox")};
  if (!box.valid()) throw ParseError("bbox", "bbox violates 0 <= x0 < x1, 0 <= y0 < y1");
  return box;
}

OrderedJson bbox_to_json(const BBox& box) { return OrderedJson::array({box.x0, box.y0, box.x1, box.y1}); }

}  // namespace btl

namespace btl {

GroundTruthStep step_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("step", "record must be a JSON object");
  GroundTruthStep step;
  try {
    const Json& id = j.at("id");
    step.id = id.is_string() ? id.get<std::string>() : id.dump();
    step.instruction = j.value("instruction", std::string{});
    if (j.contains("history")) step.history = j.at("history").get<std::vector<std::string>>();
    step.gt_action = action_from_json(j.at("gt_action"));

    if (j.contains("gt_rois")) {
      for (const auto& roi : j.at("gt_rois")) {
        if (roi.is_object())
          step.gt_rois.push_back({bbox_from_json(roi.at("bbox")), roi.at("priority").get<int>()});
        else
          step.gt_rois.push_back({bbox_from_json(roi), static_cast<int>(step.gt_rois.size()) + 1});
      }
      std::stable_sort(step.gt_rois.begin(), step.gt_rois.end(),
                       [](const RankedRoi& a, const RankedRoi& b) { return a.priority < b.priority; });
    }
    if (j.contains("gt_element_bbox") && !j.at("gt_element_bbox").is_null())
      step.gt_element_bbox = bbox_from_json(j.at("gt_element_bbox"));
    if (j.contains("screen_size")) {
      const Json& size = j.at("screen_size");
      if (!size.is_array() || size.size() != 2) throw ParseError("step", "screen_size must be [width, height]");
      step.screen_size = {size[0].get<double>(), size[1].get<double>()};
    }
  } catch (const Json::exception& e) {
    throw ParseError("step", e.what());
  }
  step.validate();
  if (takes_position(step.gt_action.function) && !step.gt_element_bbox && !(step.screen_size.x() > 0.0))
    throw InvariantError("step " + step.id + ": coordinate action needs gt_element_bbox or screen_size");
  return step;
}

}  // namespace btl
