#pragma once

#include <stdexcept>
#include <string>

namespace scdd {

enum class ErrorKind {
  io,
  parse,
  schema,
  duplicate_key,
  validation,
  unmapped_code,
  infeasible_target,
  divergent_mean,
  empty_input,
  degenerate_ratio,
  exhaustion,
  assignment,
  unassigned_origin,
  integrity,
  config,
  internal,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::schema: return "schema error";
    case ErrorKind::duplicate_key: return "duplicate-key error";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::unmapped_code: return "unmapped-code error";
    case ErrorKind::infeasible_target: return "infeasible-target error";
    case ErrorKind::divergent_mean: return "divergent-mean error";
    case ErrorKind::empty_input: return "empty-input error";
    case ErrorKind::degenerate_ratio: return "degenerate-ratio error";
    case ErrorKind::exhaustion: return "exhaustion error";
    case ErrorKind::assignment: return "assignment error";
    case ErrorKind::unassigned_origin: return "unassigned-origin error";
    case ErrorKind::integrity: return "integrity error";
    case ErrorKind::config: return "config error";
    case ErrorKind::internal: return "internal error";
  }
  return "error";
}

/// All failures raised by the library. The message is prefixed with the
/// error category so it can be shown to users verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code for an error category: 2 for bad input, 3 for
/// integrity failures, 1 for everything else.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io:
    case ErrorKind::parse:
    case ErrorKind::schema:
    case ErrorKind::duplicate_key:
    case ErrorKind::validation:
    case ErrorKind::unmapped_code:
    case ErrorKind::infeasible_target:
    case ErrorKind::config:
      return 2;
    case ErrorKind::integrity:
      return 3;
    default:
      return 1;
  }
}

}  // namespace scdd
