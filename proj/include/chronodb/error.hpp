#pragma once

#include <stdexcept>
#include <string>

namespace chronodb {

enum class Errc {
    ChecksumMismatch,
    PageOutOfRange,
    WalRuleViolation,
    SnapshotDropped,
    LogFull,
    TruncatedLsn,
    CorruptRecord,
    DuplicateTable,
    NoSuchTable,
    DuplicateKey,
    NoSuchKey,
    LockTimeout,
    OutOfSpace,
    EngineClosed,
    RetentionExceeded,
    FutureTime,
    UndoMismatch,
    BaselineGap,
    InvalidArgument,
    Io,
};

[[nodiscard]] const char *to_string(Errc code);

class Error : public std::runtime_error
{
public:
    Error(Errc code, const std::string &what);

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] void throw_errno(const std::string &context);

} // namespace chronodb
