#pragma once

#include <stdexcept>
#include <string>

namespace idealband {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -- model --------------------------------------------------------------

/// Window too narrow (radius below kMinRadius) or has no usable bounds.
struct DegenerateWindow : Error {
  using Error::Error;
};

/// A two-sided quantity was requested from a window with an infinite bound.
struct OneSidedWindow : Error {
  using Error::Error;
};

// -- estimation ----------------------------------------------------------

struct EmptyData : Error {
  using Error::Error;
};

/// The objective evaluated to NaN at some probe point (corrupt inputs).
struct NonFinite : Error {
  using Error::Error;
};

// -- simulation ----------------------------------------------------------

/// Rejection sampling hit its attempt budget without producing a sample.
struct SamplingExhausted : Error {
  using Error::Error;
};

// -- assessor ------------------------------------------------------------

struct SingleClass : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct DegenerateFold : Error {
  using Error::Error;
};

struct MalformedInstance : Error {
  using Error::Error;
};

// -- annotation ----------------------------------------------------------

struct TemplateError : Error {
  using Error::Error;
};

struct ParseFailure : Error {
  using Error::Error;
};

/// Parsed interval has lower > upper.
struct OrderViolation : Error {
  using Error::Error;
};

/// Parsed interval lies outside the rubric scale [-3, +3].
struct RangeViolation : Error {
  using Error::Error;
};

struct NetworkError : Error {
  using Error::Error;
};

// -- data_io ---------------------------------------------------------------

struct IoError : Error {
  using Error::Error;
};

/// Record-level validation failure; carries the 1-based line and field name.
struct SchemaError : Error {
  SchemaError(std::size_t line, std::string field, const std::string& what)
      : Error("line " + std::to_string(line) + ", field '" + field +
              "': " + what),
        line(line),
        field(std::move(field)) {}
  std::size_t line;
  std::string field;
};

struct DuplicateId : Error {
  DuplicateId(std::size_t line, const std::string& id)
      : Error("line " + std::to_string(line) + ": duplicate id '" + id + "'"),
        line(line),
        id(id) {}
  std::size_t line;
  std::string id;
};

}  // namespace idealband
