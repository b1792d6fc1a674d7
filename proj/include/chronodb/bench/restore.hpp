#pragma once

#include "chronodb/database.hpp"

#include <filesystem>
#include <memory>

namespace chronodb::bench {

struct RestoreResult {
    std::unique_ptr<Database> db;
    double millis = 0;
    std::uint64_t pages_copied = 0;
    Lsn baseline;
};

// Restore-and-roll-forward: copy a backup taken by Database::backup page by
// page into `target`, bring over the log of `source`, then recover with the
// log cut at `to`. Throws BaselineGap when the log no longer reaches back to
// the backup or `to` precedes it.
RestoreResult restore_baseline(const std::filesystem::path &backup, const std::filesystem::path &source,
                               const std::filesystem::path &target, Lsn to, Options opts = {});

} // namespace chronodb::bench
