// btl: batch front-end for validating, rewarding, annotating and evaluating
// Blink-Think-Link completions.
//
// Exit status: 0 success, 1 validation/scoring failure present,
// 2 usage or config error, 3 IO or join error.

#include <Eigen/Core>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "btl/annotator.hpp"
#include "btl/config.hpp"
#include "btl/errors.hpp"
#include "btl/eval.hpp"
#include "btl/format.hpp"
#include "btl/grpo.hpp"
#include "btl/json_io.hpp"
#include "btl/model_client.hpp"
#include "btl/reward.hpp"

namespace {

enum Exit : int { kOk = 0, kFailures = 1, kUsage = 2, kIo = 3 };

struct CommonFlags {
  std::optional<std::string> config_path;
  std::optional<double> tau;
  std::optional<std::size_t> lambda;
  std::optional<double> beta;
  std::optional<std::string> out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--tau", tau, "IoU threshold for ROI matching");
    cmd->add_option("--lambda", lambda, "maximum number of blink elements");
    cmd->add_option("--beta", beta, "KL coefficient");
    cmd->add_option("--out", out, "output path (default: stdout)");
  }

  btl::ConfigOverrides overrides() const {
    btl::ConfigOverrides o;
    o.tau = tau;
    o.lambda_max = lambda;
    o.beta = beta;
    return o;
  }
};

bool is_blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

// An output sink that is either a file or stdout.
class Sink {
 public:
  explicit Sink(const std::optional<std::string>& path) {
    if (path) {
      file_ = std::make_unique<std::ofstream>(*path, std::ios::trunc);
      if (!*file_) throw btl::Error("cannot open output " + *path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw btl::Error("cannot open input " + path);
  return in;
}

// A validate input line is a JSON object with a "completion" field, a JSON
// string, or the raw completion text.
std::string completion_from_line(const std::string& line) {
  const auto j = btl::Json::parse(line, nullptr, false);
  if (!j.is_discarded()) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_object() && j.contains("completion") && j["completion"].is_string()) return j["completion"];
  }
  return line;
}

int cmd_validate(const std::string& input, const CommonFlags& flags) {
  const btl::ToolConfig cfg = btl::resolve_config(flags.config_path, flags.overrides());
  const btl::FormatOptions opts{cfg.lambda_max};
  auto in = open_input(input);
  Sink sink(flags.out);
  bool all_ok = true;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto report = btl::validate(completion_from_line(line), opts);
    all_ok = all_ok && report.ok();
    btl::OrderedJson issues = btl::OrderedJson::array();
    for (const auto& issue : report.issues) issues.push_back({{"location", issue.location}, {"message", issue.message}});
    btl::OrderedJson row{{"line", line_no},
                         {"status", report.ok() ? "ok" : "invalid"},
                         {"template_ok", report.template_ok},
                         {"content_ok", report.content_ok},
                         {"issues", std::move(issues)}};
    sink.stream() << row.dump(-1, ' ', false, btl::OrderedJson::error_handler_t::replace) << '\n';
  }
  return all_ok ? kOk : kFailures;
}

std::unordered_map<std::string, btl::GroundTruthStep> load_ground_truth(const std::string& path) {
  auto in = open_input(path);
  std::unordered_map<std::string, btl::GroundTruthStep> steps;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto j = btl::Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw btl::Error("groundtruth line " + std::to_string(line_no) + " is not JSON");
    auto step = btl::step_from_json(j);
    const std::string id = step.id;
    if (!steps.emplace(id, std::move(step)).second) throw btl::JoinError("duplicate groundtruth id " + id);
  }
  return steps;
}

std::size_t count_records(const std::string& path) {
  auto in = open_input(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!is_blank(line)) ++n;
  return n;
}

int cmd_reward(const std::string& completions_path, const std::string& groundtruth_path,
               const std::optional<std::size_t>& group_size, const std::optional<std::string>& groups_out,
               const CommonFlags& flags) {
  const btl::ToolConfig cfg = btl::resolve_config(flags.config_path, flags.overrides());
  const btl::RewardConfig reward_cfg = cfg.reward_config();
  const btl::GrpoConfig grpo_cfg = cfg.grpo_config();
  if (group_size && *group_size == 0) throw btl::ConfigError("--group-size must be positive");
  if (group_size) {
    const std::size_t n = count_records(completions_path);
    if (n % *group_size != 0)
      throw btl::ConfigError(std::to_string(n) + " completions do not split into groups of " +
                             std::to_string(*group_size));
  }

  const auto truth = load_ground_truth(groundtruth_path);
  auto in = open_input(completions_path);
  Sink sink(flags.out);
  std::optional<Sink> group_sink;
  if (group_size) {
    std::optional<std::string> path = groups_out;
    if (!path && flags.out) path = *flags.out + ".groups.jsonl";
    group_sink.emplace(path);
  }

  struct Pending {
    btl::OrderedJson row;
    double reward;
  };
  std::vector<Pending> pending;
  std::size_t index = 0;
  std::size_t group_index = 0;

  auto emit_group = [&] {
    Eigen::VectorXd rewards(static_cast<Eigen::Index>(pending.size()));
    for (std::size_t i = 0; i < pending.size(); ++i) rewards(static_cast<Eigen::Index>(i)) = pending[i].reward;
    const Eigen::VectorXd adv = btl::group_advantages(rewards, grpo_cfg);
    btl::OrderedJson members = btl::OrderedJson::array();
    for (std::size_t i = 0; i < pending.size(); ++i) {
      pending[i].row["group"] = group_index;
      pending[i].row["advantage"] = adv(static_cast<Eigen::Index>(i));
      members.push_back(pending[i].row["index"]);
      sink.stream() << pending[i].row.dump() << '\n';
    }
    btl::OrderedJson group{{"group", group_index},
                           {"members", std::move(members)},
                           {"rewards", std::vector<double>(rewards.data(), rewards.data() + rewards.size())},
                           {"advantages", std::vector<double>(adv.data(), adv.data() + adv.size())}};
    group_sink->stream() << group.dump() << '\n';
    pending.clear();
    ++group_index;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto j = btl::Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("completion") ||
        !j["completion"].is_string())
      throw btl::JoinError("completions line " + std::to_string(line_no) + " needs {\"id\", \"completion\"}");
    const std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    const auto step = truth.find(id);
    if (step == truth.end()) throw btl::JoinError("no groundtruth for step " + id);

    const auto b = btl::reward_total(j["completion"].get<std::string>(), step->second, reward_cfg);
    btl::OrderedJson row{{"index", index++},     {"id", id},           {"r_format", b.r_format},
                         {"r_blink", b.r_blink}, {"r_link", b.r_link}, {"r_total", b.r_total}};
    if (!group_size) {
      sink.stream() << row.dump() << '\n';
      continue;
    }
    pending.push_back({std::move(row), b.r_total});
    if (pending.size() == *group_size) emit_group();
  }
  return kOk;
}

int cmd_annotate(const std::string& input, const CommonFlags& flags, const std::optional<std::string>& endpoint_url,
                 const std::optional<bool>& fallback, const std::optional<std::size_t>& jobs) {
  btl::ConfigOverrides o = flags.overrides();
  o.endpoint_url = endpoint_url;
  o.fallback_ranker = fallback;
  o.jobs = jobs;
  const btl::ToolConfig cfg = btl::resolve_config(flags.config_path, o);
  if (!flags.out) throw btl::ConfigError("annotate requires --out");

  std::unique_ptr<btl::ModelRanker> model;
  if (cfg.endpoint) model = std::make_unique<btl::ModelRanker>(*cfg.endpoint);

  btl::AnnotateConfig acfg;
  acfg.lambda_max = cfg.lambda_max;
  acfg.model = model.get();
  acfg.fallback = cfg.fallback_ranker;
  acfg.jobs = cfg.jobs;
  acfg.log = &std::cerr;
  const auto s = btl::annotate_dataset(input, *flags.out, acfg);
  btl::OrderedJson summary{
      {"processed", s.processed}, {"succeeded", s.succeeded}, {"fell_back", s.fell_back}, {"failed", s.failed}};
  std::cout << summary.dump() << '\n';
  return s.failed == 0 ? kOk : kFailures;
}

int cmd_eval(const std::string& dataset, const std::string& predictions, const CommonFlags& flags) {
  const btl::ToolConfig cfg = btl::resolve_config(flags.config_path, flags.overrides());
  const auto report = btl::evaluate(dataset, predictions, cfg.reward_config());
  const std::string text = report.to_json().dump(2);
  std::cout << text << '\n';
  if (flags.out) {
    std::ofstream out(*flags.out, std::ios::trunc);
    if (!out) throw btl::Error("cannot open output " + *flags.out);
    out << text << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blink-Think-Link toolkit: validate, reward, annotate, eval"};
  app.require_subcommand(1);

  CommonFlags validate_flags, reward_flags, annotate_flags, eval_flags;
  std::string validate_input;
  auto* validate = app.add_subcommand("validate", "check completions against the BTL grammar");
  validate->add_option("input", validate_input, "completions, one per line")->required();
  validate_flags.attach(validate);

  std::string completions, groundtruth;
  std::optional<std::size_t> group_size;
  std::optional<std::string> groups_out;
  auto* reward = app.add_subcommand("reward", "score completions with the BTL reward");
  reward->add_option("completions", completions, "JSONL of {id, completion}")->required();
  reward->add_option("groundtruth", groundtruth, "JSONL of ground-truth steps")->required();
  reward->add_option("--group-size", group_size, "emit contiguous groups of N with advantages");
  reward->add_option("--groups-out", groups_out, "group file (default: <out>.groups.jsonl, else stdout)");
  reward_flags.attach(reward);

  std::string annotate_input;
  std::optional<std::string> endpoint_url;
  std::optional<bool> fallback;
  std::optional<std::size_t> jobs;
  auto* annotate = app.add_subcommand("annotate", "generate blink ROI annotations");
  annotate->add_option("input", annotate_input, "JSONL of element dumps")->required();
  annotate->add_option("--endpoint-url", endpoint_url, "ranking model endpoint");
  annotate->add_flag("--fallback,!--no-fallback", fallback, "fall back to the heuristic ranker");
  annotate->add_option("--jobs", jobs, "parallel workers");
  annotate_flags.attach(annotate);

  std::string dataset, predictions;
  auto* eval = app.add_subcommand("eval", "compute Type / GR / SR metrics");
  eval->add_option("dataset", dataset, "JSONL of ground-truth steps")->required();
  eval->add_option("predictions", predictions, "JSONL of {id, completion}")->required();
  eval_flags.attach(eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) return cmd_validate(validate_input, validate_flags);
    if (*reward) return cmd_reward(completions, groundtruth, group_size, groups_out, reward_flags);
    if (*annotate) return cmd_annotate(annotate_input, annotate_flags, endpoint_url, fallback, jobs);
    if (*eval) return cmd_eval(dataset, predictions, eval_flags);
  } catch (const btl::ConfigError& e) {
    std::cerr << "btl: config error: " << e.what() << '\n';
    return kUsage;
  } catch (const btl::JoinError& e) {
    std::cerr << "btl: JoinError: " << e.what() << '\n';
    return kIo;
  } catch (const btl::Error& e) {
    std::cerr << "btl: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "btl: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}
