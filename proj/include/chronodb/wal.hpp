#pragma once

#include "chronodb/clock.hpp"
#include "chronodb/log_record.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace chronodb {

// Thrown by the crash-injection hook once the configured LSN is reached.
struct InjectedCrash : std::exception {
    const char *what() const noexcept override { return "injected crash"; }
};

struct WalOptions {
    std::filesystem::path dir;
    std::size_t segment_bytes = 16u << 20;
    bool sync = false;
    std::uint64_t max_log_bytes = 0; // 0: unbounded
    // Records above this LSN are discarded on open (restore to a point).
    Lsn stop_after;
    // Crash injection: appending a record past this LSN writes the log
    // through it, drops everything else and throws InjectedCrash.
    Lsn crash_at;
};

struct CheckpointInfo {
    Lsn begin;
    Lsn end;
    std::int64_t wall_micros = 0;
};

struct WalStats {
    std::uint64_t records_appended = 0;
    std::uint64_t bytes_appended = 0;
    std::uint64_t physical_flushes = 0;
    std::uint64_t records_read = 0;
};

// Durable pointer to the last checkpoint and the truncation horizon.
struct MasterRecord {
    Lsn checkpoint;
    Lsn horizon;
};

[[nodiscard]] std::optional<MasterRecord> read_master(const std::filesystem::path &path);
void write_master(const std::filesystem::path &path, const MasterRecord &m, bool sync);

// Segmented append-only log.
//
// Segment file: header (magic, version, first LSN) followed by frames of
// [u32 body length][u32 CRC-32 of body][body]. A record group (used for
// structure modifications) reaches disk all or nothing: flushes stop at the
// end of the last closed group and recovery drops a trailing open group.
class Wal
{
public:
    Wal(WalOptions opts, const Clock &clock);
    ~Wal();

    Wal(const Wal &) = delete;
    Wal &operator=(const Wal &) = delete;

    // Assigns the next LSN (written back into rec.lsn). Commit and
    // checkpoint-begin records get their wall clock stamped here so stamps
    // never decrease in LSN order.
    Lsn append(LogRecord &rec);

    void begin_group();
    void end_group();
    [[nodiscard]] bool in_group() const;

    void flush_up_to(Lsn lsn);
    void flush_all();

    [[nodiscard]] Lsn first_lsn() const;
    [[nodiscard]] Lsn last_lsn() const;
    [[nodiscard]] Lsn flushed_lsn() const;
    // Last LSN not inside an open group.
    [[nodiscard]] Lsn stable_lsn() const;

    [[nodiscard]] LogRecord read(Lsn lsn) const;
    // Inclusive range in LSN order; stops early when fn returns false.
    void scan(Lsn from, Lsn to, const std::function<bool(const LogRecord &)> &fn) const;

    // First full-image record of `page` with LSN in (lo, hi].
    [[nodiscard]] std::optional<Lsn> first_image_after(PageNo page, Lsn lo, Lsn hi) const;
    [[nodiscard]] std::size_t image_count() const;
    [[nodiscard]] std::vector<CheckpointInfo> checkpoints() const;
    [[nodiscard]] std::int64_t last_wall_micros() const;
    [[nodiscard]] TxnId max_txn_seen() const;

    // Removes whole segments whose records all lie below `horizon`; the
    // active segment is never removed. Returns the new first LSN.
    Lsn truncate_before(Lsn horizon);

    // Crash model: write the buffered records up to `keep_through` and drop
    // the rest. The log is unusable afterwards.
    void crash(Lsn keep_through);
    // After crash(): last durable LSN outside an incomplete group. Pages up
    // to this LSN may be written without losing atomicity.
    [[nodiscard]] Lsn durable_stable_lsn() const;

    [[nodiscard]] std::uint64_t disk_bytes() const;
    [[nodiscard]] std::size_t segment_count() const;
    [[nodiscard]] WalStats stats() const;
    [[nodiscard]] const std::filesystem::path &dir() const { return opts_.dir; }

private:
    struct File;
    struct Segment {
        std::uint64_t ordinal = 0;
        Lsn first;
        Lsn last; // nil while empty
        std::filesystem::path path;
        std::shared_ptr<File> file; // null until first write
        std::uint64_t size = 0;     // logical size including buffered frames
        std::uint64_t disk_size = 0;
    };
    struct Loc {
        std::uint64_t ordinal;
        std::uint64_t offset;
        std::uint32_t length;
    };
    struct Pending {
        Lsn lsn;
        std::uint64_t ordinal;
        std::string frame;
    };

    void open_existing();
    void index_record(const LogRecord &rec);
    Segment &segment_for(std::uint64_t ordinal);
    const Segment *find_segment(std::uint64_t ordinal) const;
    void start_segment(Lsn first);
    void write_batch(std::deque<Pending> &batch);
    [[nodiscard]] std::filesystem::path segment_path(Lsn first) const;
    [[nodiscard]] std::uint64_t disk_bytes_locked() const;

    WalOptions opts_;
    const Clock &clock_;

    mutable std::mutex mu_;
    std::condition_variable flushed_cv_;
    bool flushing_ = false;
    bool crashed_ = false;

    std::deque<Segment> segments_;
    std::uint64_t next_ordinal_ = 0;
    Lsn first_lsn_{1};
    Lsn last_lsn_;
    Lsn flushed_lsn_;
    Lsn stable_lsn_;
    bool group_open_ = false;
    Lsn group_first_;
    Lsn durable_stable_;

    std::deque<Loc> locs_; // locs_[lsn - first_lsn_]
    std::deque<Pending> pending_;
    std::deque<Pending> inflight_;

    std::unordered_map<PageNo, std::vector<Lsn>> images_;
    std::size_t image_count_ = 0;
    std::vector<CheckpointInfo> checkpoints_;
    std::unordered_map<std::uint64_t, std::int64_t> open_checkpoints_;
    std::int64_t last_wall_ = 0;
    TxnId max_txn_ = 0;

    WalStats stats_;
    mutable std::atomic<std::uint64_t> records_read_{0};
};

} // namespace chronodb
