#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace certkit {

enum class ErrorCode {
  // core
  UnknownMetric,
  UnknownLoss,
  MissingColumn,
  EmptyDataset,
  SchemaViolation,
  ParseError,
  // sampling
  InsufficientStratum,
  UnknownStrataKey,
  MissingWeights,
  EmptyStratum,
  // stattest
  InvalidCount,
  TooFewSamples,
  InvalidResampleCount,
  // multiplicity
  InvalidAlpha,
  WeightSumInvalid,
  InvalidTrialCount,
  // drift
  DimensionMismatch,
  DegenerateTable,
  SupportMismatch,
  DomainMismatch,
  NoShiftToClassify,
  // uncertainty
  InvalidSimplexRow,
  DegenerateFlags,
  // fairness
  EmptyGroup,
  EmptyCell,
  // leakage
  SchemaMismatch,
  // robustness
  MethodParamInvalid,
  SingularCovariance,
  EmptyValidation,
  DegenerateScores,
  BudgetZero,
  MissingScenarioData,
  ModelProcessError,
  // audit
  ConfigInvalid,
  DataLoadError,
  FamilyAlphaExhausted,
  StaleDataReuse,
  LedgerCorrupt,
  NoReferenceBatch,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a stable code so callers
/// (the CLI in particular) can map it onto exit codes without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace certkit
