#include "modfuse/errors.hpp"

namespace modfuse {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedFile: return "MalformedFile";
        case ErrorKind::SchemaViolation: return "SchemaViolation";
        case ErrorKind::ConsistencyError: return "ConsistencyError";
        case ErrorKind::InvalidSpec: return "InvalidSpec";
        case ErrorKind::UnknownClip: return "UnknownClip";
        case ErrorKind::BadMagic: return "BadMagic";
        case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorKind::TruncatedPayload: return "TruncatedPayload";
        case ErrorKind::NonFiniteValue: return "NonFiniteValue";
        case ErrorKind::MissingEntry: return "MissingEntry";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::DimMismatch: return "DimMismatch";
        case ErrorKind::TooFewMovies: return "TooFewMovies";
        case ErrorKind::SingleClassView: return "SingleClassView";
        case ErrorKind::UnknownMovie: return "UnknownMovie";
        case ErrorKind::EmptyMask: return "EmptyMask";
        case ErrorKind::NonFiniteDetected: return "NonFiniteDetected";
        case ErrorKind::NonScalarRoot: return "NonScalarRoot";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::UnknownModality: return "UnknownModality";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::EmptyList: return "EmptyList";
        case ErrorKind::OutOfRange: return "OutOfRange";
        case ErrorKind::MissingFeature: return "MissingFeature";
        case ErrorKind::SingleClassTrainView: return "SingleClassTrainView";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::NoPositives: return "NoPositives";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::TooFewFolds: return "TooFewFolds";
        case ErrorKind::EmptyResults: return "EmptyResults";
        case ErrorKind::UsageError: return "UsageError";
        case ErrorKind::IoError: return "IoError";
    }
    return "UnknownError";
}

}  // namespace modfuse
