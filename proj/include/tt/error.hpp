#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tt {

enum class ErrorCode {
  ShapeMismatch,
  DTypeOverflow,
  DTypeError,
  BroadcastError,
  AxisOutOfRange,
  InvalidPermutation,
  GradModeOff,
  BackwardFromNonScalar,
  DisconnectedGraph,
  EmptyParamList,
  MissingGrad,
  TargetOutOfRange,
  StepOutOfRange,
  NonFiniteLoss,
  CorruptCheckpoint,
  MissingTensor,
  KernelTooLarge,
  WindowTooLarge,
  VocabTooSmall,
  InvalidTokenId,
  TokenIdOutOfRange,
  OddDimension,
  CacheOverflow,
  SequenceTooLong,
  DomainError,
  InvalidRange,
  LevelMismatch,
  MilestoneFailed,
  FileNotFound,
  IndexOutOfRange,
  InvalidArgument,
};

std::string_view error_name(ErrorCode code);

// Single exception type for the framework; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tt
