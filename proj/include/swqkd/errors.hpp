#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace swqkd {

// Illegal state transition or missing prerequisite state.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad argument values: out-of-range window, non-positive dt, empty key, ...
class ParamError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A runtime self-check failed; the run must abort (CLI exit code 2).
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scenario parse/validation failure (CLI exit code 1). `where` names the
// offending file location or config path, `constraint` the violated rule.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string where, std::string constraint)
      : std::runtime_error(where.empty() ? constraint : where + ": " + constraint),
        where_(std::move(where)),
        constraint_(std::move(constraint)) {}

  const std::string& where() const { return where_; }
  const std::string& constraint() const { return constraint_; }

 private:
  std::string where_;
  std::string constraint_;
};

// Key-delivery API failure carrying the HTTP status it maps to.
class ApiError : public std::runtime_error {
 public:
  ApiError(int http_status, std::string message, std::vector<std::string> details = {})
      : std::runtime_error(message),
        http_status_(http_status),
        message_(std::move(message)),
        details_(std::move(details)) {}

  int http_status() const { return http_status_; }
  const std::string& message() const { return message_; }
  const std::vector<std::string>& details() const { return details_; }

 private:
  int http_status_;
  std::string message_;
  std::vector<std::string> details_;
};

}  // namespace swqkd
