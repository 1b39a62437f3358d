#include "btl/eval.hpp"

#include <fstream>
#include <set>
#include <unordered_map>

#include "btl/errors.hpp"
#include "btl/format.hpp"

namespace btl {

int metric_type(const ActionCall& pred, const ActionCall& gt) { return pred.function == gt.function ? 1 : 0; }

std::optional<int> metric_gr(const std::optional<ActionCall>& pred, const GroundTruthStep& gt, const RewardConfig& cfg) {
  if (!takes_position(gt.gt_action.function)) return std::nullopt;
  if (!pred || !pred->position) return 0;
  return position_matches(*pred->position, gt, cfg) ? 1 : 0;
}

int metric_sr(const ActionCall& pred, const GroundTruthStep& gt, const RewardConfig& cfg) {
  return reward_link(pred, gt, cfg) == 1.0 ? 1 : 0;
}

int grounding_accuracy(const Point& pred_point, const BBox& gt_bbox) { return gt_bbox.contains(pred_point) ? 1 : 0; }

namespace {

double ratio(std::size_t num, std::size_t den) { return static_cast<double>(num) / static_cast<double>(den); }

std::string record_id(const Json& j, const char* what) {
  const auto it = j.find("id");
  if (it == j.end()) throw JoinError(std::string(what) + " record without id");
  return it->is_string() ? it->get<std::string>() : it->dump();
}

}  // namespace

double EvalReport::type_acc() const { return ratio(type_correct, n_steps); }
double EvalReport::sr_acc() const { return ratio(sr_correct, n_steps); }

std::optional<double> EvalReport::gr_acc() const {
  if (gr_steps == 0) return std::nullopt;
  return ratio(gr_correct, gr_steps);
}

std::optional<double> EvalReport::grounding_acc() const {
  if (grounding_steps == 0) return std::nullopt;
  return ratio(grounding_correct, grounding_steps);
}

void EvalReport::add(const GroundTruthStep& gt, std::string_view completion, bool grounding_task,
                     const RewardConfig& cfg) {
  std::optional<ActionCall> pred;
  try {
    pred = parse_btl(completion, cfg.format).link.front().action;
  } catch (const ParseError&) {
    ++format_failures;
  }

  ++n_steps;
  const std::string gt_name(to_string(gt.gt_action.function));
  confusion[gt_name][pred ? std::string(to_string(pred->function)) : "invalid"] += 1;
  if (pred) {
    type_correct += metric_type(*pred, gt.gt_action);
    sr_correct += metric_sr(*pred, gt, cfg);
  }
  if (const auto gr = metric_gr(pred, gt, cfg)) {
    ++gr_steps;
    gr_correct += *gr;
  }
  if (grounding_task) {
    if (!gt.gt_element_bbox) throw InvariantError("grounding step " + gt.id + " lacks gt_element_bbox");
    ++grounding_steps;
    if (pred && pred->position) grounding_correct += grounding_accuracy(*pred->position, *gt.gt_element_bbox);
  }
}

OrderedJson EvalReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? OrderedJson(*v) : OrderedJson(nullptr); };
  OrderedJson j;
  j["n_steps"] = n_steps;
  j["type_acc"] = type_acc();
  j["gr_acc"] = opt(gr_acc());
  j["sr_acc"] = sr_acc();
  j["grounding_acc"] = opt(grounding_acc());
  j["counts"] = {{"type_correct", type_correct},         {"sr_correct", sr_correct},
                 {"gr_correct", gr_correct},             {"gr_steps", gr_steps},
                 {"grounding_correct", grounding_correct}, {"grounding_steps", grounding_steps},
                 {"format_failures", format_failures}};
  OrderedJson conf = OrderedJson::object();
  for (const auto& [gt, row] : confusion)
    for (const auto& [pred, count] : row) conf[gt][pred] = count;
  j["confusion"] = std::move(conf);
  return j;
}

EvalReport evaluate(const std::string& dataset_path, const std::string& predictions_path, const RewardConfig& cfg) {
  std::ifstream preds_in(predictions_path);
  if (!preds_in) throw Error("cannot open predictions " + predictions_path);
  std::unordered_map<std::string, std::string> completions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(preds_in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw JoinError("predictions line " + std::to_string(line_no) + " is not a JSON object");
    const std::string id = record_id(j, "prediction");
    const auto completion = j.find("completion");
    if (completion == j.end() || !completion->is_string())
      throw JoinError("prediction " + id + " lacks a completion string");
    if (!completions.emplace(id, completion->get<std::string>()).second)
      throw JoinError("duplicate prediction id " + id);
  }

  std::ifstream data_in(dataset_path);
  if (!data_in) throw Error("cannot open dataset " + dataset_path);
  EvalReport report;
  std::set<std::string> seen;
  line_no = 0;
  while (std::getline(data_in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw Error("dataset line " + std::to_string(line_no) + " is not a JSON object");
    const GroundTruthStep step = step_from_json(j);
    if (!seen.insert(step.id).second) throw JoinError("duplicate dataset id " + step.id);
    const auto it = completions.find(step.id);
    if (it == completions.end()) throw JoinError("no prediction for step " + step.id);
    report.add(step, it->second, j.value("task", std::string{}) == "grounding", cfg);
  }
  if (report.n_steps == 0) throw Error("empty dataset " + dataset_path);
  if (seen.size() != completions.size()) {
    for (const auto& [id, _] : completions)
      if (!seen.contains(id)) throw JoinError("prediction " + id + " has no dataset step");
  }
  return report;
}

}  // namespace btl
