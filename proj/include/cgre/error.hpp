#pragma once

#include <stdexcept>
#include <string>

namespace cgre {

// Error taxonomy. The CLI maps these onto process exit codes: parse, schema
// and config problems are data errors (exit 2), everything numeric or
// structural that goes wrong inside a computation is a numeric failure
// (exit 3).

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cgre
