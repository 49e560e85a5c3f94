#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmfg {

/// Malformed or non-finite input handed to an operator.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration violates a documented bound (CFL, n >= 4, schedule order, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errs) {
    std::string out;
    for (const auto& e : errs) {
      if (!out.empty()) out += "; ";
      out += e;
    }
    return out;
  }
  std::vector<std::string> errors_;
};

/// A solver failed to do its job (linear solve, conservation, scaling iterations).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The density equation lost or gained mass in one step beyond round-off.
class ConservationError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Compact %g rendering for messages.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace dmfg
