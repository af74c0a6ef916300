#pragma once

#include <stdexcept>
#include <string>

namespace inforeasoner {

enum class ErrorKind {
  invalid_distribution,
  impossible_observation,
  dimension_mismatch,
  invalid_input,
  missing_likelihood,
  oracle_unavailable,
  capability,
  protocol,
  env_unavailable,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_distribution: return "invalid-distribution";
    case ErrorKind::impossible_observation: return "impossible-observation";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::missing_likelihood: return "missing-likelihood";
    case ErrorKind::oracle_unavailable: return "oracle-unavailable";
    case ErrorKind::capability: return "capability";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::env_unavailable: return "env-unavailable";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Transport and oracle failures, as opposed to bad input.
  bool is_transport() const noexcept {
    return kind_ == ErrorKind::oracle_unavailable || kind_ == ErrorKind::capability ||
           kind_ == ErrorKind::protocol || kind_ == ErrorKind::env_unavailable;
  }

 private:
  ErrorKind kind_;
};

}  // namespace inforeasoner
