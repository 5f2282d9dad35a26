#pragma once

#include <stdexcept>
#include <string>

namespace stria {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// More values than slots.
struct CapacityError : Error {
  using Error::Error;
};

/// Operands from different contexts, or a mismatched slot count or layout.
struct ContextError : Error {
  using Error::Error;
};

/// Scale budget exceeded or an exact integer operation overflowed.
struct PrecisionError : Error {
  using Error::Error;
};

/// Kernel does not fit the packed channel, or the geometry is unsupported.
struct GeometryError : Error {
  using Error::Error;
};

/// Invalid block or network configuration.
struct ConfigError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& source, int line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what),
        source(source),
        line(line) {}
  std::string source;
  int line;
};

/// A network stage for which no scaling factor meets the sensitivity budget.
struct PlanningError : Error {
  PlanningError(int stage, const std::string& what)
      : Error("stage " + std::to_string(stage) + ": " + what), stage(stage) {}
  int stage;
};

}  // namespace stria
