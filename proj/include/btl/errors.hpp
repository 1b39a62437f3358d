#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace btl {

struct Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A completion failed the template or content grammar. `location` names the
// block (or element/step) where parsing first went wrong.
struct ParseError : public Error {
  std::string location;
  std::string detail;
  ParseError(std::string location_, std::string detail_)
      : Error(location_ + ": " + detail_), location(std::move(location_)), detail(std::move(detail_)) {}
};

// A value handed to a serializer or constructor violates its type invariants.
struct InvariantError : public Error {
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
struct DomainError : public Error {
  using Error::Error;
};

struct OverflowGuard : public Error {
  using Error::Error;
};

// The ranking model endpoint could not produce a usable reply after retries.
struct ModelUnavailable : public Error {
  using Error::Error;
};

// Two record streams could not be aligned by step id.
struct JoinError : public Error {
  using Error::Error;
};

struct ConfigError : public Error {
  using Error::Error;
};

}  // namespace btl
