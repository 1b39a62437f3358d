#include "btl/types.hpp"

#include <cmath>

namespace btl {

std::string_view to_string(Caption c) { return c == Caption::Dynamic ? "dynamic" : "static"; }

std::optional<Caption> caption_from_string(std::string_view s) {
  if (s == "dynamic") return Caption::Dynamic;
  if (s == "static") return Caption::Static;
  return std::nullopt;
}

std::string_view to_string(ActionType t) {
  switch (t) {
    case ActionType::Back: return "Back";
    case ActionType::Home: return "Home";
    case ActionType::Tap: return "Tap";
    case ActionType::Type: return "Type";
    case ActionType::Swipe: return "Swipe";
    case ActionType::LongPress: return "LongPress";
  }
  return "";
}

std::optional<ActionType> action_type_from_string(std::string_view s) {
  for (ActionType t : kAllActionTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Up: return "up";
    case Direction::Down: return "down";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
  }
  return "";
}

std::optional<Direction> direction_from_string(std::string_view s) {
  if (s == "up") return Direction::Up;
  if (s == "down") return Direction::Down;
  if (s == "left") return Direction::Left;
  if (s == "right") return Direction::Right;
  return std::nullopt;
}

bool ActionCall::valid() const {
  const bool wants_position = takes_position(function);
  const bool wants_text = function == ActionType::Type;
  const bool wants_direction = function == ActionType::Swipe;
  if (position.has_value() != wants_position) return false;
  if (text.has_value() != wants_text) return false;
  if (direction.has_value() != wants_direction) return false;
  if (position && !(position->allFinite() && (position->array() >= 0.0).all())) return false;
  return true;
}

bool ActionCall::operator==(const ActionCall& other) const {
  if (function != other.function || text != other.text || direction != other.direction) return false;
  if (position.has_value() != other.position.has_value()) return false;
  return !position || *position == *other.position;
}

}  // namespace btl
