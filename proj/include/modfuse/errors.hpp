#pragma once

#include <stdexcept>
#include <string>

namespace modfuse {

// Every recoverable failure in the library is thrown as an Error with a
// machine-checkable kind. Callers that need to branch on the failure mode
// (the CLI, the experiment grid, tests) switch on kind(); the message is
// for humans.
enum class ErrorKind {
    // corpus
    MalformedFile,
    SchemaViolation,
    ConsistencyError,
    // synthgen
    InvalidSpec,
    UnknownClip,
    // features
    BadMagic,
    UnsupportedVersion,
    TruncatedPayload,
    NonFiniteValue,
    MissingEntry,
    ShapeMismatch,
    DimMismatch,
    // splits
    TooFewMovies,
    SingleClassView,
    UnknownMovie,
    // autodiff
    EmptyMask,
    NonFiniteDetected,
    NonScalarRoot,
    // encoder
    InvalidConfig,
    UnknownModality,
    EmptyInput,
    // fusion
    EmptyList,
    OutOfRange,
    MissingFeature,
    // trainer
    SingleClassTrainView,
    NonFiniteLoss,
    // metrics
    NoPositives,
    LengthMismatch,
    TooFewFolds,
    // experiment
    EmptyResults,
    UsageError,
    IoError,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

const char* error_kind_name(ErrorKind kind);

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, std::string(error_kind_name(kind)) + ": " + message);
}

}  // namespace modfuse
