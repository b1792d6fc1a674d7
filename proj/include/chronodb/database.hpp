#pragma once

#include "chronodb/clock.hpp"
#include "chronodb/data_file.hpp"
#include "chronodb/log_record.hpp"
#include "chronodb/page_cache.hpp"
#include "chronodb/wal.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace chronodb {

struct Options {
    std::size_t page_size = 8192; // fixed when the database is created
    std::size_t cache_pages = 4096;
    std::uint32_t preformat_n = 64; // periodic full image every N page mutations; 0 = off
    std::int64_t undo_interval_micros = 24 * kMicrosPerHour;
    std::size_t segment_bytes = 16u << 20;
    std::uint64_t max_log_bytes = 0;
    bool sync = false;
    std::chrono::milliseconds lock_timeout{2000};
    std::shared_ptr<Clock> clock; // SystemClock when empty
    Lsn crash_at;                 // crash injection, see WalOptions
    Lsn stop_after;               // ignore the log past this LSN on open
};

struct TableInfo {
    std::string name;
    PageNo root = kNilPage;
    Lsn created;

    bool operator==(const TableInfo &) const = default;
};

struct EngineStats {
    std::uint64_t commits = 0;
    std::uint64_t aborts = 0;
    std::uint64_t splits = 0;
    std::uint64_t first_allocations = 0;
    std::uint64_t reallocations = 0;
    std::uint64_t table_drops = 0;
    std::uint64_t periodic_images = 0;
    std::uint64_t checkpoints = 0;
    std::uint64_t recovery_redo_records = 0;
    std::uint64_t recovery_undo_records = 0;
    Lsn recovery_analysis_start;
};

struct SnapshotMetrics {
    std::uint64_t pages_prepared = 0; // side-store misses run through preparePageAsOf
    std::uint64_t pages_rewound = 0;  // of those, pages with pageLSN above SplitLSN
    std::uint64_t side_hits = 0;
    std::uint64_t undo_records_read = 0;
    std::uint64_t preformat_shortcuts = 0;
    std::uint64_t analysis_records = 0; // records scanned by analysis and redo
    std::uint64_t lock_records_read = 0;
    std::uint64_t redo_page_reads = 0; // data-file reads during analysis and redo
    std::uint64_t losers = 0;
    std::uint64_t undo_actions = 0;
    double create_millis = 0;
};

enum class SnapshotState { Recovering, Online, Dropped };

namespace detail {
struct TxnState;
struct SnapshotCore;
} // namespace detail

class Database;

class Txn
{
public:
    Txn() = default;
    [[nodiscard]] TxnId id() const;
    [[nodiscard]] bool active() const;
    [[nodiscard]] Lsn last_lsn() const;

private:
    friend class Database;
    explicit Txn(std::shared_ptr<detail::TxnState> s) : state_(std::move(s)) {}
    std::shared_ptr<detail::TxnState> state_;
};

// Read-only as-of view of the database. Pages are materialized lazily:
// side-store hit, else current page rewound to the SplitLSN.
class Snapshot
{
public:
    explicit Snapshot(std::shared_ptr<detail::SnapshotCore> core) : core_(std::move(core)) {}

    [[nodiscard]] std::uint64_t id() const;
    [[nodiscard]] Lsn split_lsn() const;
    [[nodiscard]] Lsn analysis_start() const;
    [[nodiscard]] SnapshotState state() const;

    [[nodiscard]] std::vector<TableInfo> tables() const;
    [[nodiscard]] std::optional<TableInfo> table(const std::string &name) const;
    [[nodiscard]] std::optional<std::string> get(const std::string &table, std::string_view key) const;
    [[nodiscard]] std::vector<Row> scan(const std::string &table, const std::optional<std::string> &lo = {},
                                        const std::optional<std::string> &hi = {}) const;

    // The page as of the SplitLSN (side store, else prepared from primary).
    [[nodiscard]] Page read_page(PageNo no) const;
    // Side-store memoization: returns the stored image, else runs producer
    // once and stores its result.
    Page get_or_put(PageNo no, const std::function<Page()> &producer) const;

    void wait_for_undo() const;
    [[nodiscard]] bool undo_complete() const;
    [[nodiscard]] SnapshotMetrics metrics() const;
    // Records read by preparePageAsOf per page, first preparation only.
    [[nodiscard]] std::map<PageNo, std::uint64_t> page_undo_reads() const;
    [[nodiscard]] std::size_t side_store_pages() const;
    [[nodiscard]] std::filesystem::path side_store_path() const;

private:
    std::shared_ptr<detail::SnapshotCore> core_;
};

struct AsOf {
    std::optional<std::int64_t> wall_micros;
    std::optional<Lsn> lsn;

    static AsOf time(std::int64_t micros) { return AsOf{micros, std::nullopt}; }
    static AsOf at(Lsn l) { return AsOf{std::nullopt, l}; }
};

// Embedded engine over one directory:
//   data.cdb         data file
//   wal/             log segments
//   master           last checkpoint and truncation horizon
//   snapshots/       <id>.meta (JSON) and <id>.side per snapshot
class Database
{
public:
    // Opens (running crash recovery) or creates the database in `dir`.
    static std::unique_ptr<Database> open(const std::filesystem::path &dir, Options opts = {});
    ~Database();

    Database(const Database &) = delete;
    Database &operator=(const Database &) = delete;

    Txn begin();
    void commit(Txn &txn);
    void abort(Txn &txn);

    TableInfo create_table(Txn &txn, const std::string &name);
    void drop_table(Txn &txn, const std::string &name);
    void insert(Txn &txn, const std::string &table, std::string_view key, std::string_view value);
    void update(Txn &txn, const std::string &table, std::string_view key, std::string_view value);
    void erase(Txn &txn, const std::string &table, std::string_view key);

    [[nodiscard]] std::vector<TableInfo> tables();
    [[nodiscard]] std::optional<TableInfo> table(const std::string &name);
    [[nodiscard]] std::optional<std::string> get(const std::string &table, std::string_view key);
    [[nodiscard]] std::vector<Row> scan(const std::string &table, const std::optional<std::string> &lo = {},
                                        const std::optional<std::string> &hi = {});

    Lsn checkpoint();
    // Drops log segments below the retention horizon; returns the horizon.
    Lsn truncate_log();
    [[nodiscard]] Lsn retention_horizon();

    [[nodiscard]] Lsn resolve_split_lsn(std::int64_t wall_micros);
    std::shared_ptr<Snapshot> create_snapshot(const AsOf &as_of);
    [[nodiscard]] std::shared_ptr<Snapshot> snapshot(std::uint64_t id);
    [[nodiscard]] std::vector<std::shared_ptr<Snapshot>> snapshots();
    void drop_snapshot(std::uint64_t id);

    // Checkpoint, then copy the data file to `path`. Returns the checkpoint
    // LSN the copy is consistent with.
    Lsn backup(const std::filesystem::path &path);

    // Page-level access.
    [[nodiscard]] Page read_page(PageNo no);
    void flush_pages_up_to(Lsn lsn);

    // Crash simulation: optionally write dirty pages whose effects are in the
    // durable log, then drop all volatile state. The object is unusable
    // afterwards; reopen the directory to recover.
    void crash(bool flush_durable_pages);

    // Called after every page record applied in forward processing (including
    // rollback), with the page image right after the record.
    using ApplyObserver = std::function<void(const LogRecord &, const Page &)>;
    void set_apply_observer(ApplyObserver obs);

    [[nodiscard]] std::size_t page_size() const;
    [[nodiscard]] PageNo page_count() const;
    [[nodiscard]] Lsn last_lsn() const;
    [[nodiscard]] const Options &options() const;
    [[nodiscard]] Clock &clock() const;
    [[nodiscard]] EngineStats stats() const;
    [[nodiscard]] Wal &wal();
    [[nodiscard]] PageCache &cache();
    [[nodiscard]] DataFile &data_file();
    [[nodiscard]] const std::filesystem::path &dir() const;
    // Sum over allocated pages of floor(mutation_count / preformat_n).
    [[nodiscard]] std::uint64_t expected_periodic_images();

    struct Impl;

private:
    explicit Database(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

} // namespace chronodb
