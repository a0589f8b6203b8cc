#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uxprobe {

enum class ErrorCode {
  // browser-session
  kConnectionRefused,
  kHandshakeFailure,
  kProtocolError,
  kTimeout,
  kSessionClosed,
  kPrecondition,
  // overlay
  kScriptEvaluationFailure,
  // vlm-gateway
  kTransportFailure,
  kProviderRejection,
  kScriptExhausted,
  kUnparseable,
  kInvalidAction,
  // prompt-forge
  kUnknownClass,
  kUnknownGeneration,
  kDuplicateRecord,
  kInvalidRecord,
  kMalformedRefinement,
  kEmptyDatabase,
  // agent-loop / storage
  kStorageFailure,
  kUnknownRun,
  kCorruptRecord,
  // report-gen
  kEmptyTrajectory,
  kUnparseableReport,
  // harness
  kConfigError,
  kManifestParseError,
  kPortInUse,
  kCorpusInvalid,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace uxprobe
