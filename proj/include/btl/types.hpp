#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "btl/geometry.hpp"

namespace btl {

enum class Caption { Dynamic, Static };

std::string_view to_string(Caption c);
std::optional<Caption> caption_from_string(std::string_view s);

struct BlinkElement {
  std::int64_t id = 0;
  BBox bbox;
  Caption caption = Caption::Dynamic;

  bool operator==(const BlinkElement&) const = default;
};

enum class ActionType { Back, Home, Tap, Type, Swipe, LongPress };

inline constexpr std::array<ActionType, 6> kAllActionTypes = {
    ActionType::Back, ActionType::Home, ActionType::Tap, ActionType::Type, ActionType::Swipe, ActionType::LongPress};

std::string_view to_string(ActionType t);
std::optional<ActionType> action_type_from_string(std::string_view s);

// Tap and LongPress carry a screen coordinate; everything else does not.
constexpr bool takes_position(ActionType t) { return t == ActionType::Tap || t == ActionType::LongPress; }

enum class Direction { Up, Down, Left, Right };

std::string_view to_string(Direction d);
std::optional<Direction> direction_from_string(std::string_view s);

// A GUI action: the function plus exactly the arguments that function takes.
struct ActionCall {
  ActionType function = ActionType::Back;
  std::optional<Point> position;
  std::optional<std::string> text;
  std::optional<Direction> direction;

  static ActionCall back() { return {ActionType::Back, {}, {}, {}}; }
  static ActionCall home() { return {ActionType::Home, {}, {}, {}}; }
  static ActionCall tap(double x, double y) { return {ActionType::Tap, Point(x, y), {}, {}}; }
  static ActionCall long_press(double x, double y) { return {ActionType::LongPress, Point(x, y), {}, {}}; }
  static ActionCall type(std::string s) { return {ActionType::Type, {}, std::move(s), {}}; }
  static ActionCall swipe(Direction d) { return {ActionType::Swipe, {}, {}, d}; }

  // True iff the argument set is exactly the one `function` mandates and any
  // position is finite.
  bool valid() const;

  bool operator==(const ActionCall& other) const;
};

struct LinkStep {
  std::string plan;
  ActionCall action;

  bool operator==(const LinkStep&) const = default;
};

// Parsed three-phase completion. `raw` keeps the source text and does not take
// part in equality.
struct BtlOutput {
  std::vector<BlinkElement> blink;
  std::string think;
  std::vector<LinkStep> link;
  std::string raw;

  bool operator==(const BtlOutput& other) const {
    return blink == other.blink && think == other.think && link == other.link;
  }
};

}  // namespace btl
