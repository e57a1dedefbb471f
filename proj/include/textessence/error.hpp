#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace textessence {

enum class ErrorCode {
  // ingest
  HeaderMalformed,
  DimensionMismatch,
  DuplicateToken,
  NonFiniteValue,
  CountMismatch,
  ZeroVector,
  TooFewReplicates,
  DimMismatchAcrossReplicates,
  EmptySharedVocabulary,
  TerminologyMalformed,
  // stability / similarity
  ConceptAbsent,
  NotSelectable,
  TooManyComparisons,
  // projection
  TooFewPoints,
  // snapshot
  IoFailure,
  ConsistencyViolation,
  UnsupportedVersion,
  DigestMismatch,
  MissingFile,
  // generic
  InvalidArgument,
  Internal,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::HeaderMalformed: return "HeaderMalformed";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateToken: return "DuplicateToken";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::TooFewReplicates: return "TooFewReplicates";
    case ErrorCode::DimMismatchAcrossReplicates: return "DimMismatchAcrossReplicates";
    case ErrorCode::EmptySharedVocabulary: return "EmptySharedVocabulary";
    case ErrorCode::TerminologyMalformed: return "TerminologyMalformed";
    case ErrorCode::ConceptAbsent: return "ConceptAbsent";
    case ErrorCode::NotSelectable: return "NotSelectable";
    case ErrorCode::TooManyComparisons: return "TooManyComparisons";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ConsistencyViolation: return "ConsistencyViolation";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

/// Errors caused by bad input data, as opposed to bad arguments or bugs.
constexpr bool is_data_error(ErrorCode code) noexcept {
  return code != ErrorCode::InvalidArgument && code != ErrorCode::Internal;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace textessence
