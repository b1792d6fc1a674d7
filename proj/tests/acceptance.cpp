// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all criteria
//   acceptance 3 5        run a subset

#include "chronodb/bench/benchmarks.hpp"
#include "chronodb/bench/oracle.hpp"
#include "chronodb/bench/restore.hpp"
#include "chronodb/bench/workload.hpp"
#include "chronodb/btree.hpp"
#include "chronodb/database.hpp"
#include "chronodb/error.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>

using namespace chronodb;
using chronodb::test::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Tolerances and sizes, pinned.
constexpr int kHistories = 200;
constexpr std::size_t kOpsPerHistory = 5000;
constexpr int kPointsPerHistory = 32;
constexpr std::size_t kCrashRecords = 300;
constexpr std::size_t kBigTableRows = 100000;
constexpr std::size_t kLookupSlack = 4;
constexpr std::size_t kAnalysisSlack = 2;
constexpr std::size_t kRestorePages = 131072; // 1 GiB of 8 KiB pages
constexpr std::size_t kSnapshotPagesBelow = 10;

// Read-only PageIo over a snapshot, for shape queries as of the split.
class SnapshotPages final : public PageIo
{
public:
    explicit SnapshotPages(const Snapshot &s, std::size_t page_size) : s_(s), page_size_(page_size) {}
    [[nodiscard]] std::size_t page_size() const override { return page_size_; }
    PageView read(PageNo no) override { return PageView(std::make_shared<const Page>(s_.read_page(no))); }
    void apply(PageNo, const PageAction &) override { throw Error(Errc::InvalidArgument, "read only"); }
    PageNo allocate(PageType) override { throw Error(Errc::InvalidArgument, "read only"); }
    void begin_smo() override {}
    void end_smo() override {}
    void set_compensation(Lsn, Lsn) override {}

private:
    const Snapshot &s_;
    std::size_t page_size_;
};

// Same for the live database (no logging; reads only).
class PrimaryPages final : public PageIo
{
public:
    explicit PrimaryPages(Database &db) : db_(db) {}
    [[nodiscard]] std::size_t page_size() const override { return db_.page_size(); }
    PageView read(PageNo no) override { return PageView(std::make_shared<const Page>(db_.read_page(no))); }
    void apply(PageNo, const PageAction &) override { throw Error(Errc::InvalidArgument, "read only"); }
    PageNo allocate(PageType) override { throw Error(Errc::InvalidArgument, "read only"); }
    void begin_smo() override {}
    void end_smo() override {}
    void set_compensation(Lsn, Lsn) override {}

private:
    Database &db_;
};

bench::WorkloadSpec history_spec(std::uint64_t seed)
{
    bench::WorkloadSpec spec;
    spec.seed = seed;
    spec.op_count = kOpsPerHistory;
    spec.table_count = 3;
    spec.key_space = 3000;
    spec.concurrency = 3;
    spec.checkpoint_every = 500;
    spec.leave_in_flight = true;
    spec.mix.drop_table = 2;
    return spec;
}

// 1. Randomized histories, random split points, full scans against the oracle.
Outcome criterion1()
{
    std::uint64_t divergences = 0, points = 0, loser_points = 0;
    bench::WorkloadCounters totals;
    std::uint64_t splits = 0, reallocs = 0;
    std::string first;
    const std::uint32_t ns[] = {16, 64, 0, 16};
    for (int h = 0; h < kHistories; ++h) {
        TempDir dir("c1");
        auto clock = std::make_shared<ManualClock>();
        auto opts = test::small_options(clock, ns[h % 4]);
        auto db = Database::open(dir.path(), opts);
        bench::Oracle oracle;
        oracle.attach(*db);
        const auto spec = history_spec(1000 + static_cast<std::uint64_t>(h));
        const auto result = bench::run_workload(*db, spec, clock.get());
        oracle.add(result);
        totals.ops += result.counters.ops;
        totals.aborts += result.counters.aborts;
        totals.drops += result.counters.drops;
        splits += db->stats().splits;
        reallocs += db->stats().reallocations;

        std::mt19937_64 rng(spec.seed);
        const auto last = db->last_lsn().value;
        const auto start_wall = ManualClock::kDefaultEpoch;
        const auto end_wall = clock->now_micros();
        for (int p = 0; p < kPointsPerHistory; ++p) {
            // Alternate explicit LSNs and wall-clock times.
            const AsOf at = p % 2 == 0 ? AsOf::at(Lsn{1 + rng() % last})
                                       : AsOf::time(start_wall + static_cast<std::int64_t>(
                                                                     rng() % static_cast<std::uint64_t>(
                                                                                 end_wall - start_wall + 1)));
            auto snap = db->create_snapshot(at);
            snap->wait_for_undo();
            const auto diff = test::diff_snapshot(*snap, oracle);
            ++points;
            if (snap->metrics().losers > 0) {
                ++loser_points;
            }
            if (!diff.empty()) {
                if (divergences++ == 0) {
                    first = "history " + std::to_string(h) + ": " + diff;
                }
            }
            db->drop_snapshot(snap->id());
        }
    }
    std::ostringstream d;
    d << kHistories << " histories x " << kOpsPerHistory << " ops, " << points << " points, " << divergences
      << " divergences; splits=" << splits << " reallocs=" << reallocs << " drops=" << totals.drops
      << " aborts=" << totals.aborts << " points-with-losers=" << loser_points;
    if (!first.empty()) {
        d << "; first: " << first;
    }
    const bool covered = splits > 0 && reallocs > 0 && totals.drops > 0 && totals.aborts > 0 && loser_points > 0;
    return {divergences == 0 && covered, d.str()};
}

// 2. Golden scenario: snapshot, then inserts that split the leaf.
Outcome criterion2()
{
    TempDir dir("c2");
    auto clock = std::make_shared<ManualClock>();
    auto db = Database::open(dir.path(), test::small_options(clock, 0));
    const std::string pad(180, 'x');
    auto key = [](int k) { return "R" + std::string(k < 10 ? "0" : "") + std::to_string(k); };
    auto txn = db->begin();
    const auto info = db->create_table(txn, "T");
    // Enough rows that the root is internal with the low keys on one leaf.
    for (int k : {2, 3, 5, 20, 21, 22, 23, 24}) {
        db->insert(txn, "T", key(k), pad);
    }
    db->commit(txn);
    PrimaryPages prim(*db);
    const auto before = btree::pages(prim, info.root);
    const Lsn split = db->last_lsn();

    txn = db->begin();
    for (int k : {1, 4, 6, 7, 8, 9}) {
        db->insert(txn, "T", key(k), pad);
    }
    db->commit(txn);
    const auto after = btree::pages(prim, info.root);
    std::set<PageNo> created;
    for (auto p : after) {
        if (std::find(before.begin(), before.end(), p) == before.end()) {
            created.insert(p);
        }
    }

    auto snap = db->create_snapshot(AsOf::at(split));
    snap->wait_for_undo();
    const auto rows = snap->scan("T", std::nullopt, key(7));
    std::vector<std::string> keys;
    for (const auto &r : rows) {
        keys.push_back(r.key);
    }
    const std::vector<std::string> want{key(2), key(3), key(5)};

    const Page root = snap->read_page(info.root);
    bool references_new = false;
    if (root.type() == PageType::BtreeInternal) {
        for (std::size_t s = 0; s < root.slot_count(); ++s) {
            if (created.count(row_child(root.row(s)))) {
                references_new = true;
            }
        }
    }
    const Page live_root = db->read_page(info.root);
    bool live_references_new = false;
    for (std::size_t s = 0; live_root.type() == PageType::BtreeInternal && s < live_root.slot_count(); ++s) {
        live_references_new = live_references_new || created.count(row_child(live_root.row(s))) > 0;
    }
    std::ostringstream d;
    d << "as-of scan < " << key(7) << " returned {";
    for (std::size_t i = 0; i < keys.size(); ++i) {
        d << (i ? "," : "") << keys[i];
    }
    d << "}; pages created after split " << created.size() << "; prepared root references them: "
      << (references_new ? "yes" : "no") << "; live root references them: " << (live_references_new ? "yes" : "no");
    return {keys == want && !created.empty() && !references_new && live_references_new &&
                root.type() == PageType::BtreeInternal,
            d.str()};
}

// 3. Crash at every record boundary of a scripted history.
Outcome criterion3()
{
    bench::WorkloadSpec spec;
    spec.seed = 77;
    spec.op_count = 135;
    spec.table_count = 2;
    spec.key_space = 200;
    spec.concurrency = 2;
    spec.checkpoint_every = 15;
    spec.mix.drop_table = 6;
    spec.max_value = 200;

    auto options = [](std::shared_ptr<ManualClock> c) {
        auto o = test::small_options(std::move(c), 16);
        o.cache_pages = 6; // evictions put uncommitted pages on disk
        return o;
    };
    // Reference run: full trace and commit LSNs.
    bench::Oracle oracle;
    Lsn total;
    bench::WorkloadCounters counters;
    EngineStats ref_stats;
    {
        TempDir dir("c3ref");
        auto clock = std::make_shared<ManualClock>();
        auto db = Database::open(dir.path(), options(clock));
        const auto r = bench::run_workload(*db, spec, clock.get());
        oracle.add(r);
        counters = r.counters;
        ref_stats = db->stats();
        total = db->last_lsn();
    }
    if (total.value < kCrashRecords) {
        return {false, "scripted history too short: " + std::to_string(total.value) + " records"};
    }
    std::size_t failures = 0, idempotence_failures = 0;
    std::string first;
    for (std::uint64_t k = 1; k <= total.value; ++k) {
        TempDir dir("c3");
        {
            auto clock = std::make_shared<ManualClock>();
            auto o = options(clock);
            o.crash_at = Lsn{k};
            try {
                auto db = Database::open(dir.path(), o);
                try {
                    (void)bench::run_workload(*db, spec, clock.get());
                } catch (const InjectedCrash &) {
                }
                db->crash(k % 2 == 0);
            } catch (const InjectedCrash &) {
                // Crashed while creating the database.
            }
        }
        auto clock = std::make_shared<ManualClock>();
        std::string diff, diff2;
        try {
            auto db = Database::open(dir.path(), options(clock));
            diff = test::diff_primary(*db, oracle, Lsn{k});
            db->crash(true);
        } catch (const std::exception &e) {
            diff = std::string("recovery failed: ") + e.what();
        }
        try {
            auto db = Database::open(dir.path(), options(clock));
            diff2 = test::diff_primary(*db, oracle, Lsn{k});
        } catch (const std::exception &e) {
            diff2 = std::string("recovery failed: ") + e.what();
        }
        if (!diff.empty()) {
            if (failures++ == 0) {
                first = "crash at " + std::to_string(k) + ": " + diff;
            }
        }
        if (!diff2.empty()) {
            if (idempotence_failures++ == 0 && first.empty()) {
                first = "second recovery after crash at " + std::to_string(k) + ": " + diff2;
            }
        }
    }
    std::ostringstream d;
    d << total.value << " crash points over a " << total.value << "-record history: " << failures
      << " mismatches, " << idempotence_failures << " non-idempotent recoveries; history has "
      << counters.commits << " commits, " << counters.aborts << " aborts, " << counters.drops << " drops, "
      << ref_stats.splits << " splits, " << ref_stats.reallocations << " reallocations";
    if (!first.empty()) {
        d << "; first: " << first;
    }
    return {failures == 0 && idempotence_failures == 0, d.str()};
}

// 4. Pages prepared by a point lookup and by a full scan on a 1e5-row table.
Outcome criterion4()
{
    TempDir dir("c4");
    auto clock = std::make_shared<ManualClock>();
    Options o;
    o.page_size = 4096;
    o.preformat_n = 64;
    o.clock = clock;
    auto db = Database::open(dir.path(), o);
    auto txn = db->begin();
    db->create_table(txn, "big");
    db->commit(txn);
    for (std::size_t i = 0; i < kBigTableRows;) {
        txn = db->begin();
        for (std::size_t j = 0; j < 2000 && i < kBigTableRows; ++j, ++i) {
            db->insert(txn, "big", bench::make_key(i * 7919 % kBigTableRows), "value-" + std::to_string(i));
        }
        db->commit(txn);
    }
    const Lsn split = db->last_lsn();
    // Later updates so every page read below needs rewinding.
    txn = db->begin();
    for (std::size_t i = 0; i < kBigTableRows; i += 10) {
        db->update(txn, "big", bench::make_key(i), "changed");
    }
    db->commit(txn);

    PrimaryPages prim(*db);
    const auto root = db->table("big")->root;
    const auto shape = btree::shape(prim, root);
    const auto catalog_height = btree::shape(prim, kCatalogRoot).height;

    auto snap = db->create_snapshot(AsOf::at(split));
    snap->wait_for_undo();
    const auto v = snap->get("big", bench::make_key(4242));
    const auto lookup_prepared = snap->metrics().pages_prepared;
    db->drop_snapshot(snap->id());

    auto snap2 = db->create_snapshot(AsOf::at(split));
    snap2->wait_for_undo();
    const auto rows = snap2->scan("big");
    const auto scan_prepared = snap2->metrics().pages_prepared;
    db->drop_snapshot(snap2->id());

    const auto lookup_expected = catalog_height + shape.height;
    const auto scan_expected = catalog_height + shape.leaves + shape.internals;
    std::ostringstream d;
    d << "height " << shape.height << ", leaves " << shape.leaves << ", internals " << shape.internals
      << "; lookup prepared " << lookup_prepared << " (expected " << lookup_expected << ", bound "
      << shape.height + kLookupSlack << "); scan prepared " << scan_prepared << " (expected " << scan_expected
      << ", bound " << shape.leaves + shape.internals + kLookupSlack << "); scan rows " << rows.size();
    return {v.has_value() && rows.size() == kBigTableRows && lookup_prepared == lookup_expected &&
                scan_prepared == scan_expected && lookup_prepared <= shape.height + kLookupSlack &&
                scan_prepared <= shape.leaves + shape.internals + kLookupSlack,
            d.str()};
}

// 5. Records read per prepared page against the oracle's page history.
Outcome criterion5()
{
    std::uint64_t pages_checked = 0, mismatches = 0, bound_violations = 0, max_reads_16 = 0, max_reads_64 = 0;
    std::string first;
    for (const std::uint32_t n : {0u, 16u, 64u}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            TempDir dir("c5");
            auto clock = std::make_shared<ManualClock>();
            auto db = Database::open(dir.path(), test::small_options(clock, n));
            bench::Oracle oracle;
            oracle.attach(*db);
            auto spec = history_spec(500 + seed);
            spec.leave_in_flight = false;
            oracle.add(bench::run_workload(*db, spec, clock.get()));
            std::mt19937_64 rng(seed * 31 + n);
            for (int p = 0; p < 8; ++p) {
                const Lsn at{1 + rng() % db->last_lsn().value};
                auto snap = db->create_snapshot(AsOf::at(at));
                snap->wait_for_undo();
                (void)snap->tables();
                for (const auto &t : snap->tables()) {
                    (void)snap->scan(t.name);
                }
                for (const auto &[page, reads] : snap->page_undo_reads()) {
                    const Lsn page_lsn = db->read_page(page).lsn();
                    const auto want = oracle.expected_rewind_reads(page, snap->split_lsn(), page_lsn, n != 0);
                    const auto post = oracle.records_between(page, snap->split_lsn(), page_lsn);
                    ++pages_checked;
                    if (reads != want || (n == 0 && reads != post)) {
                        if (mismatches++ == 0) {
                            first = "page " + std::to_string(page) + " read " + std::to_string(reads) +
                                    ", oracle " + std::to_string(want);
                        }
                    }
                    if (n != 0 && reads > n + 2) {
                        ++bound_violations;
                    }
                    if (n == 16) {
                        max_reads_16 = std::max(max_reads_16, reads);
                    } else if (n == 64) {
                        max_reads_64 = std::max(max_reads_64, reads);
                    }
                }
                db->drop_snapshot(snap->id());
            }
        }
    }
    std::ostringstream d;
    d << pages_checked << " prepared pages checked, " << mismatches << " count mismatches, " << bound_violations
      << " over N+2; max reads N=16: " << max_reads_16 << ", N=64: " << max_reads_64;
    if (!first.empty()) {
        d << "; first: " << first;
    }
    return {mismatches == 0 && bound_violations == 0 && pages_checked > 0, d.str()};
}

// 6. Snapshot creation: no page reads in redo, scan bounded by one interval.
Outcome criterion6()
{
    TempDir dir("c6");
    auto clock = std::make_shared<ManualClock>();
    auto opts = test::small_options(clock, 64);
    opts.cache_pages = 64;
    auto db = Database::open(dir.path(), opts);
    auto spec = history_spec(66);
    spec.op_count = 6000;
    spec.checkpoint_every = 300;
    spec.leave_in_flight = false;
    bench::run_workload(*db, spec, clock.get());
    const auto cps = db->wal().checkpoints();
    std::uint64_t interval = 0;
    for (std::size_t i = 1; i < cps.size(); ++i) {
        interval = std::max(interval, cps[i].begin.value - cps[i - 1].begin.value);
    }
    // Ages from a fraction of an interval up to ten intervals.
    const std::int64_t step = static_cast<std::int64_t>(spec.checkpoint_every) * spec.clock_step_micros;
    const auto now = clock->now_micros();
    std::uint64_t max_scan = 0, page_reads = 0, snapshots = 0;
    bool ok = true;
    for (int i = 1; i <= 20; ++i) {
        const auto age = step * i / 2;
        auto snap = db->create_snapshot(AsOf::time(now - age));
        snap->wait_for_undo();
        const auto m = snap->metrics();
        max_scan = std::max(max_scan, m.analysis_records);
        page_reads += m.redo_page_reads;
        ok = ok && m.redo_page_reads == 0 && m.analysis_records <= interval + kAnalysisSlack;
        ++snapshots;
        db->drop_snapshot(snap->id());
    }
    std::ostringstream d;
    d << snapshots << " snapshots aged 0.5..10 checkpoint intervals; redo page reads " << page_reads
      << "; max analysis scan " << max_scan << " records; checkpoint interval " << interval << " records (+"
      << kAnalysisSlack << ")";
    return {ok && interval > 0, d.str()};
}

// 7. Log volume against the periodic-image interval.
Outcome criterion7()
{
    TempDir dir("c7");
    bench::BenchConfig cfg;
    cfg.work_dir = dir.path();
    cfg.page_size = 1024;
    auto spec = history_spec(7);
    spec.op_count = 20000;
    spec.leave_in_flight = false;
    std::vector<bench::OverheadTrial> trials;
    const auto report = bench::bench_logging_overhead(spec, {16, 64}, cfg, &trials);
    std::ostringstream d;
    bool ok = trials.size() == 3;
    for (const auto &t : trials) {
        d << "N=" << bench::format_n(t.n) << ": " << t.log_bytes << " bytes, " << t.periodic_images << " images (sum "
          << t.expected_images << "); ";
        ok = ok && t.periodic_images == t.expected_images && t.max_page_mutations > 16;
    }
    ok = ok && trials[0].log_bytes > trials[1].log_bytes && trials[1].log_bytes > trials[2].log_bytes;
    d << "max page mutations " << trials[0].max_page_mutations;
    return {ok, d.str()};
}

// 8. Retention window with an injected clock.
Outcome criterion8()
{
    TempDir dir("c8");
    auto clock = std::make_shared<ManualClock>();
    auto opts = test::small_options(clock, 64);
    opts.undo_interval_micros = kMicrosPerHour;
    opts.segment_bytes = 32 * 1024;
    auto db = Database::open(dir.path(), opts);
    bench::Oracle oracle;
    oracle.attach(*db);
    auto spec = history_spec(8);
    spec.op_count = 3600;
    spec.clock_step_micros = 3 * kMicrosPerSecond; // about 3 hours in total
    spec.checkpoint_every = 100;
    spec.leave_in_flight = false;
    oracle.add(bench::run_workload(*db, spec, clock.get()));
    const auto span = clock->now_micros() - ManualClock::kDefaultEpoch;
    db->truncate_log();
    const auto now = clock->now_micros();

    std::string old_error = "none";
    try {
        db->create_snapshot(AsOf::time(now - 2 * kMicrosPerHour));
    } catch (const Error &e) {
        old_error = to_string(e.code());
    }
    auto snap = db->create_snapshot(AsOf::time(now - 30 * kMicrosPerMinute));
    snap->wait_for_undo();
    const Lsn pin = snap->analysis_start();
    const auto segments_before = db->wal().segment_count();

    // Move well past the window; the snapshot still pins its log.
    clock->advance(3 * kMicrosPerHour);
    bench::WorkloadSpec more = spec;
    more.seed = 9;
    more.op_count = 1500;
    more.clock_step_micros = 1000;
    oracle.add(bench::run_workload(*db, more, clock.get()));
    db->truncate_log();
    const auto first_pinned = db->wal().first_lsn();
    const auto diff = test::diff_snapshot(*snap, oracle);
    db->drop_snapshot(snap->id());
    db->checkpoint();
    db->truncate_log();
    const auto first_after = db->wal().first_lsn();

    std::ostringstream d;
    d << "history " << span / kMicrosPerMinute << " min; age 2h -> " << old_error
      << "; age 30min -> ok; pinned first LSN " << first_pinned << " <= pin " << pin << " ("
      << segments_before << " segments); after drop first LSN " << first_after
      << (diff.empty() ? "; snapshot intact" : "; " + diff);
    return {old_error == "RetentionExceeded" && first_pinned <= pin && diff.empty() && first_after > pin &&
                span >= 3 * kMicrosPerHour - kMicrosPerMinute,
            d.str()};
}

// 9. Restore baseline on a 1 GiB database against a snapshot point lookup.
Outcome criterion9(const fs::path &csv)
{
    TempDir dir("c9");
    auto clock = std::make_shared<ManualClock>();
    Options o;
    o.page_size = 8192;
    o.cache_pages = 2048;
    o.preformat_n = 64;
    o.undo_interval_micros = 0; // keep only what checkpoints need while loading
    o.clock = clock;
    const auto src = dir / "src";
    auto db = Database::open(src, o);
    auto txn = db->begin();
    db->create_table(txn, "bulk");
    db->commit(txn);
    const std::string value(1900, 'v');
    std::uint64_t k = 0;
    while (db->page_count() < kRestorePages) {
        txn = db->begin();
        for (int j = 0; j < 2000 && db->page_count() < kRestorePages; ++j) {
            db->insert(txn, "bulk", bench::make_key(k++), value);
        }
        db->commit(txn);
        clock->advance(kMicrosPerSecond);
        db->checkpoint();
        db->truncate_log();
    }
    const auto backup = dir / "backup.cdb";
    db->backup(backup);
    txn = db->begin();
    for (int j = 0; j < 100; ++j) {
        db->update(txn, "bulk", bench::make_key(static_cast<std::uint64_t>(j) * 97), "updated");
    }
    db->commit(txn);
    const Lsn to = db->last_lsn();
    // Work after the restore point, so the snapshot has something to rewind.
    txn = db->begin();
    for (int j = 0; j < 100; ++j) {
        db->update(txn, "bulk", bench::make_key(static_cast<std::uint64_t>(j) * 97), "later");
    }
    db->commit(txn);
    const auto pages = db->data_file().page_count();
    const auto backup_pages = DataFile(backup, 8192, false).page_count();

    const auto s0 = std::chrono::steady_clock::now();
    auto snap = db->create_snapshot(AsOf::at(to));
    const auto hit = snap->get("bulk", bench::make_key(97));
    const double snap_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - s0).count();
    const auto prepared = snap->metrics().pages_prepared;

    auto restored = bench::restore_baseline(backup, src, dir / "dst", to, o);
    const auto restored_value = restored.db->get("bulk", bench::make_key(97));

    bench::MetricsReport report;
    bench::MetricsRow row;
    row.label = "restore-1GiB";
    row.n = bench::format_n(o.preformat_n);
    row.log_bytes = db->wal().stats().bytes_appended;
    row.snapshot_create_millis = snap_ms;
    row.pages_prepared = prepared;
    row.undo_records_read = snap->metrics().undo_records_read;
    row.restore_baseline_millis = restored.millis;
    row.restore_pages_copied = restored.pages_copied;
    row.timing_ratio = snap_ms > 0 ? restored.millis / snap_ms : 0;
    report.rows.push_back(row);
    report.write_csv(csv);

    std::ostringstream d;
    d << backup_pages << " pages (" << backup_pages * 8192 / (1 << 20) << " MiB); restore copied "
      << restored.pages_copied << " pages in " << static_cast<long>(restored.millis) << " ms; snapshot lookup prepared "
      << prepared << " pages in " << static_cast<long>(snap_ms) << " ms; ratio " << row.timing_ratio << " (CSV "
      << csv.filename().string() << ")";
    return {restored.pages_copied == backup_pages && backup_pages >= kRestorePages && prepared < kSnapshotPagesBelow &&
                hit == std::optional<std::string>("updated") && restored_value == hit && pages >= backup_pages,
            d.str()};
}

std::string run_cli(const std::string &args)
{
    const std::string cmd = "CHRONODB_CLOCK=manual '" CHRONODB_CLI_PATH "' " + args + " 2>&1";
    std::string out;
    if (FILE *p = ::popen(cmd.c_str(), "r")) {
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) {
            out.append(buf, n);
        }
        if (::pclose(p) != 0) {
            throw std::runtime_error("command failed: " + args + "\n" + out);
        }
    }
    return out;
}

// 10. Dropped-table walkthrough through the command-line tool.
Outcome criterion10()
{
    TempDir dir("c10");
    const auto db = "--db '" + (dir / "db").string() + "' ";
    run_cli(db + "init --page-size 1024");
    run_cli(db + "table create accounts");
    std::vector<Row> oracle;
    for (int i = 0; i < 120; ++i) {
        const auto key = bench::make_key(static_cast<std::uint64_t>(i));
        const auto value = "balance-" + std::to_string(i * 13);
        run_cli(db + "put --table accounts " + key + " " + value);
        oracle.push_back(Row{key, value});
    }
    const auto status = run_cli(db + "status");
    const auto pos = status.find("now ");
    const auto when = status.substr(pos + 4, status.find('\n', pos) - pos - 4);
    run_cli(db + "table drop accounts");
    const auto created = run_cli(db + "snapshot create --as-of '" + when + "'");
    const auto id = created.substr(9, created.find(' ', 9) - 9);
    run_cli(db + "copy --from-snapshot " + id + " --table accounts --into accounts");
    const auto out = run_cli(db + "query scan --table accounts");
    std::vector<Row> rows;
    std::istringstream in(out);
    std::string line;
    while (std::getline(in, line)) {
        const auto tab = line.find('\t');
        rows.push_back(Row{line.substr(0, tab), line.substr(tab + 1)});
    }
    std::ostringstream d;
    d << "120 rows, dropped, snapshot " << id << " as of '" << when << "', copied back: " << rows.size()
      << " rows, " << (rows == oracle ? "equal" : "DIFFERENT") << " to the pre-drop rows";
    return {rows == oracle, d.str()};
}

} // namespace

int main(int argc, char **argv)
{
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        only.insert(std::atoi(argv[i]));
    }
    const fs::path csv = fs::current_path() / "acceptance_restore.csv";
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"as-of equivalence over randomized histories", criterion1},
        {"golden scenario: split after the snapshot", criterion2},
        {"crash sweep at every record boundary", criterion3},
        {"pages prepared proportional to data accessed", criterion4},
        {"per-page undo records read", criterion5},
        {"snapshot recovery cost", criterion6},
        {"logging overhead trend", criterion7},
        {"retention enforcement", criterion8},
        {"restore baseline comparison", [&] { return criterion9(csv); }},
        {"dropped-table recovery via CLI", criterion10},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(n)) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %d: %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
