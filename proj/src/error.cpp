#include "mrtrus/error.hpp"

#include <fmt/format.h>

namespace mrtrus {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnmatchedSlice: return "UnmatchedSlice";
    case ErrorKind::DegeneratePolygon: return "DegeneratePolygon";
    case ErrorKind::SpacingMismatch: return "SpacingMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

ParseError::ParseError(int line, const std::string& message)
    : Error(ErrorKind::ParseError,
            line > 0 ? fmt::format("line {}: {}", line, message) : message),
      line_(line) {}

}  // namespace mrtrus
