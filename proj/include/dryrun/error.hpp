#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dryrun {

enum class ErrorCode {
    InvalidArgument,
    Io,
    SyntaxError,
    UnknownRegister,
    UnbalancedLock,
    OverlappingHotScope,
    UnguardedShared,
    SymbolLeak,
    JobBusy,
    TrapFault,
    QueueOverflow,
    ArityMismatch,
    NotSimpleLoop,
    CorruptStream,
    AwaitBeforeSend,
    FrameCorrupt,
    DigestMismatch,
    DeviceMapMismatch,
    Divergence,
    RecordAfterFinalize,
    ReleaseConsistency,
    SchemaMismatch,
    ProtocolError,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library surfaces as this exception; `code()` is the
/// stable discriminator tests and the CLI dispatch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Parse diagnostics carry a 1-based source position.
class ParseError : public Error {
public:
    ParseError(ErrorCode code, int line, int column, const std::string& what)
        : Error(code, "line " + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}

    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// Raised when a device touches (or the driver touches) a page it does not own.
class TrapFault : public Error {
public:
    TrapFault(uint32_t page, const std::string& who)
        : Error(ErrorCode::TrapFault, who + " accessed page " + std::to_string(page) + " while unmapped"),
          page_(page) {}

    [[nodiscard]] uint32_t page() const noexcept { return page_; }

private:
    uint32_t page_;
};

}  // namespace dryrun
