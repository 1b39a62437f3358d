#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "btl/types.hpp"

namespace btl {

inline constexpr std::size_t kDefaultLambdaMax = 5;

struct FormatOptions {
  // Upper bound on the number of <element> records in a blink block.
  std::size_t lambda_max = kDefaultLambdaMax;
};

struct Issue {
  std::string location;
  std::string message;

  bool operator==(const Issue&) const = default;
};

struct ValidationReport {
  bool template_ok = false;
  bool content_ok = false;
  std::vector<Issue> issues;

  bool ok() const { return template_ok && content_ok; }
};

// Structural check: one <blink>, one <think>, one <link> block in that order,
// only whitespace outside them and no block tag nested inside another.
bool check_template(std::string_view raw);

// Body check: blink is `None` or a run of <element> records, think is
// non-empty, and link is `answer([...])` holding a JSON array of steps.
// False whenever check_template is false.
bool check_content(std::string_view raw, const FormatOptions& opts = {});

ValidationReport validate(std::string_view raw, const FormatOptions& opts = {});

// Throws ParseError naming the first offending location.
BtlOutput parse_btl(std::string_view raw, const FormatOptions& opts = {});

// Returns `None` for an empty list. Throws InvariantError on invalid boxes,
// non-positive ids or duplicate ids.
std::string serialize_blink(std::span<const BlinkElement> elements);

// `{"function": "Tap", "position": [60, 40]}` with keys in canonical order.
std::string serialize_action(const ActionCall& action);

// `answer([{"Plan": ..., "Action": ...}, ...])`
std::string serialize_link(std::span<const LinkStep> steps);

std::string serialize_btl(const BtlOutput& output);

// Shortest round-tripping decimal without exponent: 10 -> "10", 0.5 -> "0.5".
std::string format_number(double value);

}  // namespace btl
