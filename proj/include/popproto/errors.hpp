#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace popproto {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

struct DuplicateTransition : ParseError {
  using ParseError::ParseError;
};

struct RoleError : Error {
  using Error::Error;
};

struct UnknownState : Error {
  using Error::Error;
};

struct CountError : Error {
  using Error::Error;
};

struct NotApplicable : Error {
  using Error::Error;
};

/// A transition sequence stopped being applicable at `index`.
struct InvalidAt : Error {
  InvalidAt(std::size_t index, const std::string& what)
      : Error("step " + std::to_string(index) + ": " + what), index(index) {}
  std::size_t index;
};

struct PopulationTooSmall : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct UnknownName : Error {
  using Error::Error;
};

struct NonNaturalCoefficient : Error {
  using Error::Error;
};

struct NegativeCoefficient : Error {
  using Error::Error;
};

struct NotOrderable : Error {
  NotOrderable(std::vector<std::string> remaining, const std::string& what)
      : Error(what), remaining(std::move(remaining)) {}
  std::vector<std::string> remaining;
};

struct InsufficientOccurrences : Error {
  InsufficientOccurrences(std::size_t position, const std::string& what)
      : Error(what), position(position) {}
  /// 0-based position of the offending transition in the Δ-ordering.
  std::size_t position;
};

struct InvalidEdit : Error {
  using Error::Error;
};

struct BufferTooSmall : Error {
  using Error::Error;
};

}  // namespace popproto
