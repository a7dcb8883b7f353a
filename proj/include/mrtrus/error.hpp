#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrtrus {

/// Failure classes shared by every module. The names are part of the
/// service and CLI contract (they appear verbatim in error bodies).
enum class ErrorKind {
  EmptyInput,
  InvalidConfig,
  InvalidInput,
  InvalidSpec,
  InsufficientData,
  NonFinite,
  ParseError,
  DimensionMismatch,
  UnmatchedSlice,
  DegeneratePolygon,
  SpacingMismatch,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return to_string(kind_); }

 private:
  ErrorKind kind_;
};

/// Malformed file content. `line()` is 1-based; 0 means "whole file".
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& message);

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace mrtrus
