#pragma once

#include <stdexcept>
#include <string>

namespace svrtune {

/// Base of all library errors. `stage` names the pipeline stage that raised it
/// (empty when raised outside the pipeline).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string stage = {})
      : std::runtime_error(what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }
  void set_stage(std::string stage) { stage_ = std::move(stage); }

 private:
  std::string stage_;
};

/// Malformed or inconsistent input (dimension mismatch, too few points, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Data that makes the requested quantity undefined (all points equal, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Evaluation outside an operation's admissible domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A search did not find what it was looking for in its scan range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Missing or malformed columns in a data file.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace svrtune
