#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oodselect {

enum class ErrorKind {
  Io,
  Parse,
  NonBinaryCell,
  RaggedRow,
  DuplicateModelId,
  DuplicateExampleId,
  EmptyMatrix,
  UnknownId,
  InvalidArgument,
  InvalidConfig,
  DegenerateSelection,
  DegenerateVariance,
  DegenerateCorrelation,
  TooFewModels,
  InsufficientFamilies,
  EmptySets,
  NormalizationDegenerate,
  DimensionMismatch,
  CombinatorialGuardExceeded,
  OptimizationFailed,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::NonBinaryCell: return "NonBinaryCell";
    case ErrorKind::RaggedRow: return "RaggedRow";
    case ErrorKind::DuplicateModelId: return "DuplicateModelId";
    case ErrorKind::DuplicateExampleId: return "DuplicateExampleId";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::DegenerateSelection: return "DegenerateSelection";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::DegenerateCorrelation: return "DegenerateCorrelation";
    case ErrorKind::TooFewModels: return "TooFewModels";
    case ErrorKind::InsufficientFamilies: return "InsufficientFamilies";
    case ErrorKind::EmptySets: return "EmptySets";
    case ErrorKind::NormalizationDegenerate: return "NormalizationDegenerate";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::CombinatorialGuardExceeded: return "CombinatorialGuardExceeded";
    case ErrorKind::OptimizationFailed: return "OptimizationFailed";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace oodselect
