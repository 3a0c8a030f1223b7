#include "visrank/errors.hpp"

namespace visrank {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownSkillCategory: return "UnknownSkillCategory";
    case ErrorCode::EmptyTagSet: return "EmptyTagSet";
    case ErrorCode::RatingOutOfRange: return "RatingOutOfRange";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyGeneration: return "EmptyGeneration";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::CyclicDependency: return "CyclicDependency";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::DegenerateAllTies: return "DegenerateAllTies";
    case ErrorCode::InsufficientPairableValues: return "InsufficientPairableValues";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::MissingScore: return "MissingScore";
    case ErrorCode::MissingRating: return "MissingRating";
    case ErrorCode::GenerationFailure: return "GenerationFailure";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void raise(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace visrank
