#include "chronodb/error.hpp"

#include <cerrno>
#include <cstring>

namespace chronodb {

const char *to_string(Errc code)
{
    switch (code) {
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::PageOutOfRange: return "PageOutOfRange";
    case Errc::WalRuleViolation: return "WalRuleViolation";
    case Errc::SnapshotDropped: return "SnapshotDropped";
    case Errc::LogFull: return "LogFull";
    case Errc::TruncatedLsn: return "TruncatedLsn";
    case Errc::CorruptRecord: return "CorruptRecord";
    case Errc::DuplicateTable: return "DuplicateTable";
    case Errc::NoSuchTable: return "NoSuchTable";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::NoSuchKey: return "NoSuchKey";
    case Errc::LockTimeout: return "LockTimeout";
    case Errc::OutOfSpace: return "OutOfSpace";
    case Errc::EngineClosed: return "EngineClosed";
    case Errc::RetentionExceeded: return "RetentionExceeded";
    case Errc::FutureTime: return "FutureTime";
    case Errc::UndoMismatch: return "UndoMismatch";
    case Errc::BaselineGap: return "BaselineGap";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string &what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what),
      code_(code)
{
}

void throw_errno(const std::string &context)
{
    throw Error(Errc::Io, context + ": " + std::strerror(errno));
}

} // namespace chronodb
