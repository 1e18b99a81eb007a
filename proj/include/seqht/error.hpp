#pragma once

#include <stdexcept>
#include <string>

namespace seqht {

enum class ErrorCode {
  InadmissibleParameter,
  OutOfSupport,
  UnsupportedFamily,
  InvalidHypothesisSet,
  DuplicateHypothesis,
  ZeroEvidence,
  RankTooHigh,
  HorizonNotConverged,
  InvalidSolverConfig,
  NonterminatingPolicy,
  StageOutOfRange,
  ConfigError,
  PolicyFormat,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace seqht
