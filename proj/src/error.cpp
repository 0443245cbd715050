#include "nnse/error.hpp"

namespace nnse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteParameter: return "NonFiniteParameter";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UnboundVariable: return "UnboundVariable";
    case ErrorCode::StackUnderflow: return "StackUnderflow";
    case ErrorCode::NonlinearTerm: return "NonlinearTerm";
    case ErrorCode::InvalidMarking: return "InvalidMarking";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace nnse
