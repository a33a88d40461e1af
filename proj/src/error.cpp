#include "dryrun/error.hpp"

namespace dryrun {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::UnknownRegister: return "UnknownRegister";
        case ErrorCode::UnbalancedLock: return "UnbalancedLock";
        case ErrorCode::OverlappingHotScope: return "OverlappingHotScope";
        case ErrorCode::UnguardedShared: return "UnguardedShared";
        case ErrorCode::SymbolLeak: return "SymbolLeak";
        case ErrorCode::JobBusy: return "JobBusy";
        case ErrorCode::TrapFault: return "TrapFault";
        case ErrorCode::QueueOverflow: return "QueueOverflow";
        case ErrorCode::ArityMismatch: return "ArityMismatch";
        case ErrorCode::NotSimpleLoop: return "NotSimpleLoop";
        case ErrorCode::CorruptStream: return "CorruptStream";
        case ErrorCode::AwaitBeforeSend: return "AwaitBeforeSend";
        case ErrorCode::FrameCorrupt: return "FrameCorrupt";
        case ErrorCode::DigestMismatch: return "DigestMismatch";
        case ErrorCode::DeviceMapMismatch: return "DeviceMapMismatch";
        case ErrorCode::Divergence: return "Divergence";
        case ErrorCode::RecordAfterFinalize: return "RecordAfterFinalize";
        case ErrorCode::ReleaseConsistency: return "ReleaseConsistency";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::ProtocolError: return "ProtocolError";
    }
    return "Unknown";
}

}  // namespace dryrun
