#pragma once

#include <stdexcept>
#include <string>

namespace visrank {

enum class ErrorCode {
  // dataset
  MissingFile,
  MalformedRecord,
  DuplicateId,
  UnknownSkillCategory,
  EmptyTagSet,
  RatingOutOfRange,
  DuplicateEntry,
  UnknownItem,
  UnknownCategory,
  // backends
  BackendUnavailable,
  BackendError,
  Timeout,
  ProbabilityOutOfRange,
  DimensionMismatch,
  EmptyGeneration,
  // scorers
  ZeroVector,
  ParseError,
  CyclicDependency,
  // metaeval
  DegenerateVariance,
  DegenerateAllTies,
  InsufficientPairableValues,
  NoOverlap,
  // ranking
  MissingScore,
  MissingRating,
  GenerationFailure,
  // config / misc
  ConfigError,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

// Single exception type for all domain errors; tests dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace visrank
