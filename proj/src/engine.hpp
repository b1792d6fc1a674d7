#pragma once

#include "chronodb/btree.hpp"
#include "chronodb/database.hpp"
#include "chronodb/lock_table.hpp"
#include "chronodb/page_io.hpp"
#include "chronodb/side_store.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <thread>

namespace chronodb {

namespace detail {

enum class TxnPhase { Active, Committed, Aborted };

struct TxnState {
    TxnId id = 0;
    TxnPhase phase = TxnPhase::Active;
    bool begun = false; // TxnBegin logged
    Lsn first_lsn;
    Lsn last_lsn;
    std::set<PageNo> pending_free; // deallocated; reusable once the txn ends
};

struct ActiveEntry {
    Lsn first;
    Lsn last;
};

[[nodiscard]] std::string encode_catalog_value(PageNo root, Lsn created);
[[nodiscard]] TableInfo decode_catalog_row(std::string_view key, std::string_view value);

// Logical (key-based) undo of one transaction record through `io`. Records
// without a logical inverse (formats, images, structure modifications) are
// ignored.
void logical_undo(PageIo &io, const LogRecord &rec);
[[nodiscard]] bool needs_logical_undo(const LogRecord &rec);

} // namespace detail

class PrimaryIo;

struct Database::Impl {
    std::filesystem::path dir;
    Options opts;
    std::shared_ptr<Clock> clock;
    std::unique_ptr<Wal> wal;
    std::unique_ptr<DataFile> file;
    std::unique_ptr<PageCache> cache;
    LockTable locks;

    // Mutating operations, commit-record appends and checkpoints run
    // exclusively; reads share.
    mutable std::shared_mutex op_mu;

    std::map<TxnId, detail::ActiveEntry> active; // guarded by op_mu
    std::atomic<TxnId> next_txn{1};
    std::atomic<PageNo> page_count{0};
    PageNo next_fresh = 0;
    std::set<PageNo> free_pages;
    std::mutex free_mu;
    Lsn last_checkpoint;
    Lsn last_alloc_lsn; // Alloc record of the latest allocate_page
    bool recovering = false;

    mutable std::mutex snap_mu;
    std::map<std::uint64_t, std::shared_ptr<detail::SnapshotCore>> snapshots;
    std::uint64_t next_snapshot_id = 1;

    mutable std::mutex stats_mu;
    EngineStats stats;
    ApplyObserver observer;

    std::atomic<bool> closed{false};
    std::atomic<bool> crashed{false};

    Impl(const std::filesystem::path &dir, Options opts);

    void check_open() const;
    void bootstrap();
    void recover();
    void rebuild_free_pages();
    void load_snapshots();

    PageNo allocate_page(PrimaryIo &io, PageType type);
    Lsn checkpoint_locked();
    Lsn truncate_horizon();
    void rollback(detail::TxnState &txn, PrimaryIo &io);
    void finish_txn(detail::TxnState &txn, detail::TxnPhase phase);

    std::optional<TableInfo> lookup_table(PageIo &io, const std::string &name);
    Lsn resolve_split(std::int64_t wall);
    std::optional<CheckpointInfo> analysis_checkpoint(Lsn split);
    std::shared_ptr<detail::SnapshotCore> create_snapshot(const AsOf &as_of);
    void drop_snapshot(std::uint64_t id);
    // Copy of a primary page, with the log durable through its pageLSN.
    Page copy_primary_page(PageNo no);

    template <class Fn>
    void bump(Fn fn)
    {
        std::lock_guard lock(stats_mu);
        fn(stats);
    }
};

// Logged page access for the primary database. Must be used while holding
// op_mu exclusively (or single-threaded during recovery) for mutations.
class PrimaryIo final : public PageIo
{
public:
    PrimaryIo(Database::Impl &engine, detail::TxnState *txn) : e_(engine), txn_(txn) {}
    ~PrimaryIo() override;

    [[nodiscard]] std::size_t page_size() const override { return e_.file->page_size(); }
    PageView read(PageNo no) override;
    void apply(PageNo no, const PageAction &action) override;
    PageNo allocate(PageType type) override { return e_.allocate_page(*this, type); }
    void begin_smo() override;
    void end_smo() override;
    void set_compensation(Lsn undone, Lsn undo_next) override;

    void begin_group();
    void end_group();
    // Appends a record that touches no page on behalf of the transaction.
    Lsn log_txn_record(RecordBody body);

    [[nodiscard]] Lsn last_lsn() const { return last_lsn_; }

private:
    Lsn append(LogRecord &rec);
    void ensure_begun();

    Database::Impl &e_;
    detail::TxnState *txn_;
    int group_depth_ = 0;
    bool smo_ = false;
    std::optional<std::pair<Lsn, Lsn>> compensation_;
    std::vector<PageRef> group_pins_;
    Lsn last_lsn_;
};

namespace detail {

struct SnapshotCore {
    Database::Impl *engine = nullptr;
    std::uint64_t id = 0;
    Lsn split;
    Lsn analysis_start;
    Lsn pin;
    std::optional<std::int64_t> as_of_wall;
    std::vector<ActiveTxn> losers;
    std::filesystem::path meta_path;

    std::atomic<SnapshotState> state{SnapshotState::Recovering};
    std::unique_ptr<SideStore> side;
    LockTable locks{std::chrono::milliseconds(-1)};
    mutable std::shared_mutex tree_mu;
    std::mutex prep_mu;
    PageNo next_virtual = kFirstVirtualPage;

    std::thread worker;
    std::atomic<bool> stop{false};
    mutable std::mutex undo_mu;
    std::condition_variable undo_cv;
    bool undo_done = false;
    std::exception_ptr undo_error;

    mutable std::mutex metrics_mu;
    SnapshotMetrics metrics;
    std::map<PageNo, std::uint64_t> page_reads;

    void check_alive() const;
    Page read(PageNo no);
    Page get_or_put(PageNo no, const std::function<Page()> &producer);
    // Analysis from analysis_start to split plus lock reacquisition.
    void recover();
    void start_undo();
    void run_undo();
    void persist_meta() const;
    // Stops the undo worker and fails waiting queries.
    void shutdown();
    // Deletes the side store and metadata (after shutdown).
    void remove_files();
};

class SnapshotIo final : public PageIo
{
public:
    explicit SnapshotIo(SnapshotCore &core) : core_(core) {}

    [[nodiscard]] std::size_t page_size() const override { return core_.engine->file->page_size(); }
    PageView read(PageNo no) override;
    void apply(PageNo no, const PageAction &action) override;
    PageNo allocate(PageType type) override;
    void begin_smo() override {}
    void end_smo() override {}
    void set_compensation(Lsn, Lsn) override {}

private:
    SnapshotCore &core_;
};

} // namespace detail

} // namespace chronodb
