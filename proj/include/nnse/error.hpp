#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nnse {

enum class ErrorCode {
  MissingFile,
  MalformedJson,
  InvalidModel,
  ShapeMismatch,
  NonFiniteParameter,
  NonFiniteActivation,
  EmptyDataset,
  UnboundVariable,
  StackUnderflow,
  NonlinearTerm,
  InvalidMarking,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// All library failures surface as this exception. what() is prefixed with
/// the error code name, e.g. "ShapeMismatch: layer 3 ...".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nnse
