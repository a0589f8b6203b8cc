#include "uxprobe/common/error.hpp"

namespace uxprobe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConnectionRefused: return "connection-refused";
    case ErrorCode::kHandshakeFailure: return "handshake-failure";
    case ErrorCode::kProtocolError: return "protocol-error";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kSessionClosed: return "session-closed";
    case ErrorCode::kPrecondition: return "precondition-violation";
    case ErrorCode::kScriptEvaluationFailure: return "script-evaluation-failure";
    case ErrorCode::kTransportFailure: return "transport-failure";
    case ErrorCode::kProviderRejection: return "provider-rejection";
    case ErrorCode::kScriptExhausted: return "script-exhausted";
    case ErrorCode::kUnparseable: return "unparseable";
    case ErrorCode::kInvalidAction: return "invalid-action";
    case ErrorCode::kUnknownClass: return "unknown-class";
    case ErrorCode::kUnknownGeneration: return "unknown-generation";
    case ErrorCode::kDuplicateRecord: return "duplicate-record";
    case ErrorCode::kInvalidRecord: return "invalid-record";
    case ErrorCode::kMalformedRefinement: return "malformed-refinement";
    case ErrorCode::kEmptyDatabase: return "empty-database";
    case ErrorCode::kStorageFailure: return "storage-failure";
    case ErrorCode::kUnknownRun: return "unknown-run";
    case ErrorCode::kCorruptRecord: return "corrupt-record";
    case ErrorCode::kEmptyTrajectory: return "empty-trajectory";
    case ErrorCode::kUnparseableReport: return "unparseable-report";
    case ErrorCode::kConfigError: return "config-error";
    case ErrorCode::kManifestParseError: return "manifest-parse-error";
    case ErrorCode::kPortInUse: return "port-in-use";
    case ErrorCode::kCorpusInvalid: return "corpus-invalid";
  }
  return "unknown-error";
}

}  // namespace uxprobe
