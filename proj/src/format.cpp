#include "btl/format.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>

#include "btl/errors.hpp"
#include "btl/json_io.hpp"

namespace btl {

namespace {

constexpr std::array<std::string_view, 6> kBlockTags = {"<blink>", "</blink>", "<think>",
                                                        "</think>", "<link>", "</link>"};
constexpr std::string_view kAnswerOpen = "answer(";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

struct Blocks {
  std::string_view blink;
  std::string_view think;
  std::string_view link;
};

std::optional<Blocks> split_blocks(std::string_view raw, Issue* issue) {
  auto fail = [&](std::string location, std::string message) -> std::optional<Blocks> {
    if (issue) *issue = {std::move(location), std::move(message)};
    return std::nullopt;
  };

  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < raw.size() && is_space(raw[pos])) ++pos;
  };

  std::array<std::string_view, 3> bodies;
  constexpr std::array<std::string_view, 3> names = {"blink", "think", "link"};
  for (std::size_t b = 0; b < names.size(); ++b) {
    const std::string name(names[b]);
    const std::string open = "<" + name + ">";
    const std::string close = "</" + name + ">";
    skip_ws();
    if (raw.substr(pos, open.size()) != open) return fail(name, "expected " + open);
    pos += open.size();
    const std::size_t end = raw.find(close, pos);
    if (end == std::string_view::npos) return fail(name, "unterminated block, missing " + close);
    const std::string_view body = raw.substr(pos, end - pos);
    for (std::string_view tag : kBlockTags)
      if (body.find(tag) != std::string_view::npos) return fail(name, "nested block tag " + std::string(tag));
    bodies[b] = body;
    pos = end + close.size();
  }
  skip_ws();
  if (pos != raw.size()) return fail("template", "unexpected text after </link>");
  return Blocks{bodies[0], bodies[1], bodies[2]};
}

// Minimal forward scanner over a blink body.
class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }
  bool done() const { return pos_ >= text_.size(); }
  bool eat(std::string_view token) {
    if (text_.substr(pos_, token.size()) != token) return false;
    pos_ += token.size();
    return true;
  }
  // Text up to (not including) `token`, consuming the token.
  std::optional<std::string_view> until(std::string_view token) {
    const std::size_t end = text_.find(token, pos_);
    if (end == std::string_view::npos) return std::nullopt;
    const std::string_view out = text_.substr(pos_, end - pos_);
    pos_ = end + token.size();
    return out;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

// Non-negative decimal: digits with an optional fraction, no sign or exponent.
std::optional<double> parse_decimal(std::string_view s) {
  s = trim(s);
  std::size_t i = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == 0) return std::nullopt;
  if (i < s.size()) {
    if (s[i] != '.') return std::nullopt;
    const std::size_t frac_start = ++i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i == frac_start || i != s.size()) return std::nullopt;
  }
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value, std::chars_format::fixed);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<std::int64_t> parse_id(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  for (char c : s)
    if (c < '0' || c > '9') return std::nullopt;
  std::int64_t value = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || value <= 0) return std::nullopt;
  return value;
}

std::optional<BBox> parse_bbox_text(std::string_view s) {
  s = trim(s);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') return std::nullopt;
  s = s.substr(1, s.size() - 2);
  std::array<double, 4> v{};
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t comma = s.find(',');
    if ((k < 3) != (comma != std::string_view::npos)) return std::nullopt;
    const auto value = parse_decimal(k < 3 ? s.substr(0, comma) : s);
    if (!value) return std::nullopt;
    v[k] = *value;
    if (k < 3) s.remove_prefix(comma + 1);
  }
  return BBox{v[0], v[1], v[2], v[3]};
}

std::vector<BlinkElement> parse_blink_body(std::string_view body, const FormatOptions& opts, std::vector<Issue>& issues) {
  body = trim(body);
  if (body == "None") return {};

  std::vector<BlinkElement> out;
  std::set<std::int64_t> seen;
  Cursor cur(body);
  auto fail = [&](std::size_t index, std::string message) {
    issues.push_back({"blink.element[" + std::to_string(index) + "]", std::move(message)});
    return std::vector<BlinkElement>{};
  };

  if (body.empty()) {
    issues.push_back({"blink", "empty body, use None for no elements"});
    return {};
  }
  while (true) {
    cur.skip_ws();
    if (cur.done()) break;
    const std::size_t index = out.size();
    if (!cur.eat("<element>")) return fail(index, "expected <element>");
    cur.skip_ws();
    if (!cur.eat("<id>")) return fail(index, "expected <id>");
    const auto id_text = cur.until("</id>");
    if (!id_text) return fail(index, "missing </id>");
    const auto id = parse_id(*id_text);
    if (!id) return fail(index, "id must be a positive integer");
    if (!seen.insert(*id).second) return fail(index, "duplicate id " + std::to_string(*id));
    cur.skip_ws();
    if (!cur.eat("<bbox>")) return fail(index, "expected <bbox>");
    const auto bbox_text = cur.until("</bbox>");
    if (!bbox_text) return fail(index, "missing </bbox>");
    const auto bbox = parse_bbox_text(*bbox_text);
    if (!bbox) return fail(index, "bbox must be [x0, y0, x1, y1]");
    if (!bbox->valid()) return fail(index, "bbox violates 0 <= x0 < x1, 0 <= y0 < y1");
    cur.skip_ws();
    if (!cur.eat("<caption>")) return fail(index, "expected <caption>");
    const auto caption_text = cur.until("</caption>");
    if (!caption_text) return fail(index, "missing </caption>");
    const auto caption = caption_from_string(trim(*caption_text));
    if (!caption) return fail(index, "caption must be one of [dynamic, static]");
    cur.skip_ws();
    if (!cur.eat("</element>")) return fail(index, "expected </element>");
    out.push_back({*id, *bbox, *caption});
    if (out.size() > opts.lambda_max) {
      issues.push_back({"blink", "more than " + std::to_string(opts.lambda_max) + " elements"});
      return {};
    }
  }
  return out;
}

std::vector<LinkStep> parse_link_body(std::string_view body, std::vector<Issue>& issues) {
  body = trim(body);
  if (!body.starts_with(kAnswerOpen) || !body.ends_with(')')) {
    issues.push_back({"link", "body must be answer([...])"});
    return {};
  }
  const std::string_view payload = body.substr(kAnswerOpen.size(), body.size() - kAnswerOpen.size() - 1);
  const Json parsed = Json::parse(payload, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    issues.push_back({"link", "answer payload is not valid JSON"});
    return {};
  }
  if (!parsed.is_array() || parsed.empty()) {
    issues.push_back({"link", "answer payload must be a non-empty JSON array"});
    return {};
  }

  std::vector<LinkStep> steps;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    const std::string location = "link[" + std::to_string(i) + "]";
    const Json& step = parsed[i];
    if (!step.is_object()) {
      issues.push_back({location, "step must be a JSON object"});
      return {};
    }
    for (const auto& [key, _] : step.items()) {
      if (key != "Plan" && key != "Action") {
        issues.push_back({location, "unexpected key \"" + key + "\""});
        return {};
      }
    }
    const auto plan = step.find("Plan");
    if (plan == step.end() || !plan->is_string()) {
      issues.push_back({location, "missing string field \"Plan\""});
      return {};
    }
    const auto action = step.find("Action");
    if (action == step.end()) {
      issues.push_back({location, "missing field \"Action\""});
      return {};
    }
    try {
      steps.push_back({plan->get<std::string>(), action_from_json(*action)});
    } catch (const ParseError& e) {
      issues.push_back({location + ".Action", e.detail});
      return {};
    }
  }
  return steps;
}

struct ParseOutcome {
  bool template_ok = false;
  std::vector<Issue> issues;
  BtlOutput value;
};

// Single code path behind check_content, validate and parse_btl.
ParseOutcome parse_impl(std::string_view raw, const FormatOptions& opts) {
  ParseOutcome out;
  Issue issue;
  const auto blocks = split_blocks(raw, &issue);
  if (!blocks) {
    out.issues.push_back(std::move(issue));
    return out;
  }
  out.template_ok = true;
  out.value.blink = parse_blink_body(blocks->blink, opts, out.issues);
  const std::string_view think = trim(blocks->think);
  if (think.empty()) out.issues.push_back({"think", "empty reasoning"});
  out.value.think = std::string(think);
  out.value.link = parse_link_body(blocks->link, out.issues);
  out.value.raw = std::string(raw);
  return out;
}

std::string json_string(const std::string& s) {
  return Json(s).dump(-1, ' ', false, Json::error_handler_t::replace);
}

}  // namespace

bool check_template(std::string_view raw) { return split_blocks(raw, nullptr).has_value(); }

bool check_content(std::string_view raw, const FormatOptions& opts) {
  const auto outcome = parse_impl(raw, opts);
  return outcome.template_ok && outcome.issues.empty();
}

ValidationReport validate(std::string_view raw, const FormatOptions& opts) {
  auto outcome = parse_impl(raw, opts);
  ValidationReport report;
  report.template_ok = outcome.template_ok;
  report.content_ok = outcome.template_ok && outcome.issues.empty();
  report.issues = std::move(outcome.issues);
  return report;
}

BtlOutput parse_btl(std::string_view raw, const FormatOptions& opts) {
  auto outcome = parse_impl(raw, opts);
  if (!outcome.issues.empty()) throw ParseError(outcome.issues.front().location, outcome.issues.front().message);
  return std::move(outcome.value);
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  std::array<char, 512> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed);
  if (res.ec != std::errc{}) throw InvariantError("format_number: value not representable");
  return std::string(buf.data(), res.ptr);
}

std::string serialize_blink(std::span<const BlinkElement> elements) {
  if (elements.empty()) return "None";
  std::set<std::int64_t> seen;
  std::string out;
  for (const auto& e : elements) {
    if (e.id <= 0) throw InvariantError("serialize_blink: element id must be positive");
    if (!seen.insert(e.id).second) throw InvariantError("serialize_blink: duplicate element id " + std::to_string(e.id));
    if (!e.bbox.valid()) throw InvariantError("serialize_blink: invalid bbox for element " + std::to_string(e.id));
    out += "<element><id>" + std::to_string(e.id) + "</id><bbox>[" + format_number(e.bbox.x0) + ", " +
           format_number(e.bbox.y0) + ", " + format_number(e.bbox.x1) + ", " + format_number(e.bbox.y1) +
           "]</bbox><caption>" + std::string(to_string(e.caption)) + "</caption></element>";
  }
  return out;
}

std::string serialize_action(const ActionCall& action) {
  if (!action.valid()) throw InvariantError("serialize_action: argument set does not match function");
  std::string out = "{\"function\": \"" + std::string(to_string(action.function)) + "\"";
  if (action.position)
    out += ", \"position\": [" + format_number(action.position->x()) + ", " + format_number(action.position->y()) + "]";
  if (action.text) out += ", \"text\": " + json_string(*action.text);
  if (action.direction) out += ", \"direction\": \"" + std::string(to_string(*action.direction)) + "\"";
  return out + "}";
}

std::string serialize_link(std::span<const LinkStep> steps) {
  if (steps.empty()) throw InvariantError("serialize_link: at least one step required");
  std::string out = "answer([";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += ", ";
    out += "{\"Plan\": " + json_string(steps[i].plan) + ", \"Action\": " + serialize_action(steps[i].action) + "}";
  }
  return out + "])";
}

std::string serialize_btl(const BtlOutput& output) {
  const std::string_view think = trim(output.think);
  if (think.empty()) throw InvariantError("serialize_btl: think must be non-empty");
  for (std::string_view tag : kBlockTags)
    if (think.find(tag) != std::string_view::npos) throw InvariantError("serialize_btl: think contains a block tag");
  const std::string link = serialize_link(output.link);
  for (std::string_view tag : kBlockTags)
    if (link.find(tag) != std::string::npos) throw InvariantError("serialize_btl: link text contains a block tag");
  return "<blink> " + serialize_blink(output.blink) + " </blink>\n<think> " + std::string(think) + " </think>\n<link> " +
         link + " </link>";
}

}  // namespace btl
