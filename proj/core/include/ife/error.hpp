#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ife {

enum class ErrorCode {
  // validation: bad input or configuration
  InvalidConfig,
  InvalidSpec,
  MissingColumn,
  UnbalancedPanel,
  NonNumericCell,
  DuplicateCell,
  RankArgumentOutOfRange,
  BandwidthOutOfRange,
  RMaxTooLarge,
  UnsupportedOrder,
  Io,
  // numerical: input was well-formed but the computation cannot proceed
  NotSymmetric,
  DegenerateProjection,
  SingularDesign,
  NoConvergedStart,
  DegreesOfFreedomExhausted,
  NearSingularW,
  SingularFactorGram,
  RankDeficientStructure,
  LapackFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for codes that describe malformed input rather than a numerical failure.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ife
