// As-of snapshots: split resolution, admission, page rewind and lifecycle.
#include "chronodb/bench/oracle.hpp"
#include "chronodb/bench/workload.hpp"
#include "chronodb/error.hpp"
#include "chronodb/page_io.hpp"
#include "chronodb/prepare.hpp"
#include "chronodb/wal.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <random>
#include <thread>

using namespace chronodb;
using chronodb::test::TempDir;
using bench::make_key;

namespace {

constexpr std::int64_t kT0 = ManualClock::kDefaultEpoch;
constexpr std::int64_t kSec = kMicrosPerSecond;

Errc code_of(const std::function<void()> &fn)
{
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::Io;
}

// Commits one insert at wall time `at`; returns the commit LSN.
Lsn commit_at(Database &db, ManualClock &clock, std::int64_t at, const std::string &key)
{
    clock.set(at);
    auto t = db.begin();
    db.insert(t, "t", key, "v@" + std::to_string((at - kT0) / kSec));
    db.commit(t);
    return db.last_lsn();
}

bench::WorkloadSpec churn_spec(std::uint64_t seed)
{
    bench::WorkloadSpec spec;
    spec.seed = seed;
    spec.op_count = 1500;
    spec.table_count = 2;
    spec.key_space = 400;
    spec.checkpoint_every = 200;
    spec.mix.drop_table = 4; // drops free pages, later tables reuse them
    return spec;
}

} // namespace

TEST(SplitResolution, LastCommitAtOrBeforeTime)
{
    TempDir dir("tt-resolve");
    auto clock = std::make_shared<ManualClock>();
    auto db = Database::open(dir.path(), test::small_options(clock));
    clock->set(kT0);
    auto t = db->begin();
    db->create_table(t, "t");
    db->commit(t);
    const auto c10 = commit_at(*db, *clock, kT0 + 10 * kSec, "a");
    const auto c20 = commit_at(*db, *clock, kT0 + 20 * kSec, "b");
    const auto c30 = commit_at(*db, *clock, kT0 + 30 * kSec, "c");
    clock->set(kT0 + 40 * kSec);

    EXPECT_EQ(db->resolve_split_lsn(kT0 + 25 * kSec), c20);
    EXPECT_EQ(db->resolve_split_lsn(kT0 + 20 * kSec), c20); // ties resolve to the commit
    EXPECT_EQ(db->resolve_split_lsn(kT0 + 10 * kSec), c10);
    EXPECT_EQ(db->resolve_split_lsn(kT0 + 35 * kSec), c30);

    auto snap = db->create_snapshot(AsOf::time(kT0 + 25 * kSec));
    EXPECT_EQ(snap->split_lsn(), c20);
    snap->wait_for_undo();
    EXPECT_EQ(snap->scan("t"), (std::vector<Row>{{"a", "v@10"}, {"b", "v@20"}}));
}

TEST(SplitResolution, Admission)
{
    TempDir dir("tt-admit");
    auto clock = std::make_shared<ManualClock>();
    auto o = test::small_options(clock);
    o.undo_interval_micros = kMicrosPerHour;
    auto db = Database::open(dir.path(), o);
    auto t = db->begin();
    db->create_table(t, "t");
    db->commit(t);
    clock->advance(2 * kMicrosPerHour);
    const auto now = clock->now_micros();

    EXPECT_EQ(code_of([&] { db->create_snapshot(AsOf::time(now + kSec)); }), Errc::FutureTime);
    EXPECT_EQ(code_of([&] { db->create_snapshot(AsOf::time(now - 2 * kMicrosPerHour)); }),
              Errc::RetentionExceeded);
    EXPECT_EQ(code_of([&] { db->create_snapshot(AsOf::at(db->last_lsn().next().next())); }), Errc::FutureTime);
    EXPECT_EQ(code_of([&] { db->create_snapshot(AsOf{}); }), Errc::InvalidArgument);
    EXPECT_NO_THROW(db->create_snapshot(AsOf::time(now - kMicrosPerHour + kSec)));
    EXPECT_NO_THROW(db->create_snapshot(AsOf::time(now)));
}

TEST(SnapshotTest, IsolatedFromLaterWrites)
{
    TempDir dir("tt-iso");
    auto clock = std::make_shared<ManualClock>();
    auto db = Database::open(dir.path(), test::small_options(clock));
    auto t = db->begin();
    db->create_table(t, "t");
    for (int i = 0; i < 300; ++i) {
        db->insert(t, "t", make_key(i), "old");
    }
    db->commit(t);
    const auto before = db->scan("t");
    auto snap = db->create_snapshot(AsOf::at(db->last_lsn()));

    t = db->begin();
    for (int i = 0; i < 300; ++i) {
        if (i % 3 == 0) {
            db->erase(t, "t", make_key(i));
        } else {
            db->update(t, "t", make_key(i), "new value that is longer");
        }
    }
    for (int i = 300; i < 900; ++i) {
        db->insert(t, "t", make_key(i), "more");
    }
    db->commit(t);
    snap->wait_for_undo();
    EXPECT_EQ(snap->scan("t"), before);
    EXPECT_EQ(snap->get("t", make_key(3)), "old");
    EXPECT_EQ(snap->get("t", make_key(600)), std::nullopt);
    EXPECT_GT(snap->metrics().pages_rewound, 0u);
}

TEST(SnapshotTest, InFlightWorkAtTheSplitIsInvisible)
{
    TempDir dir("tt-inflight");
    auto clock = std::make_shared<ManualClock>();
    auto db = Database::open(dir.path(), test::small_options(clock));
    auto t = db->begin();
    db->create_table(t, "t");
    db->insert(t, "t", "committed", "1");
    db->commit(t);

    auto loser = db->begin();
    for (int i = 0; i < 400; ++i) {
        db->insert(loser, "t", make_key(i), std::string(30, 'x'));
    }
    auto snap = db->create_snapshot(AsOf::at(db->last_lsn()));
    db->commit(loser); // commits after the split
    snap->wait_for_undo();
    EXPECT_TRUE(snap->undo_complete());
    EXPECT_EQ(snap->metrics().losers, 1u);
    EXPECT_EQ(snap->scan("t"), (std::vector<Row>{{"committed", "1"}}));
    EXPECT_EQ(db->scan("t").size(), 401u);
}

TEST(SnapshotTest, DroppedTableReadableAsOfBeforeTheDrop)
{
    TempDir dir("tt-drop");
    auto clock = std::make_shared<ManualClock>();
    auto db = Database::open(dir.path(), test::small_options(clock));
    auto t = db->begin();
    db->create_table(t, "orders");
    for (int i = 0; i < 500; ++i) {
        db->insert(t, "orders", make_key(i), "order-" + std::to_string(i));
    }
    db->commit(t);
    const auto rows = db->scan("orders");
    clock->advance(kSec);
    const auto before_drop = clock->now_micros();
    clock->advance(kSec);
    t = db->begin();
    db->drop_table(t, "orders");
    db->commit(t);
    // New work reuses the freed pages.
    t = db->begin();
    db->create_table(t, "other");
    for (int i = 0; i < 500; ++i) {
        db->insert(t, "other", make_key(i), "overwrites");
    }
    db->commit(t);
    EXPECT_GT(db->stats().reallocations, 0u);
    EXPECT_EQ(db->table("orders"), std::nullopt);

    auto snap = db->create_snapshot(AsOf::time(before_drop));
    snap->wait_for_undo();
    ASSERT_TRUE(snap->table("orders"));
    EXPECT_EQ(snap->table("other"), std::nullopt);
    EXPECT_EQ(snap->scan("orders"), rows);

    // Copy back into the primary.
    t = db->begin();
    db->create_table(t, "orders");
    for (const auto &r : snap->scan("orders")) {
        db->insert(t, "orders", r.key, r.value);
    }
    db->commit(t);
    EXPECT_EQ(db->scan("orders"), rows);
}

// Rewinding the current image of any page gives exactly the image the page
// had at that LSN, and reads exactly the records the oracle predicts.
TEST(PreparePageProperty, MatchesForwardCaptures)
{
    for (const std::uint32_t n : {0u, 8u, 32u}) {
        TempDir dir("tt-prepare");
        auto clock = std::make_shared<ManualClock>();
        auto db = Database::open(dir.path(), test::small_options(clock, n));
        bench::Oracle oracle;
        oracle.attach(*db);
        oracle.add(bench::run_workload(*db, churn_spec(40 + n), clock.get()));
        ASSERT_GT(db->stats().reallocations, 0u);

        std::mt19937_64 rng(n);
        const auto last = db->last_lsn().value;
        for (int round = 0; round < 25; ++round) {
            const Lsn as_of{1 + rng() % last};
            for (const PageNo no : oracle.pages()) {
                auto page = db->read_page(no);
                const auto page_lsn = page.lsn();
                PrepareStats stats;
                prepare_page_as_of(page, as_of, db->wal(), n != 0, stats);
                auto want = oracle.page_at(no, as_of).value_or(Page(db->page_size()));
                page.set_checksum(0);
                want.set_checksum(0);
                ASSERT_EQ(page, want) << "N=" << n << " page " << no << " as of " << as_of;
                ASSERT_EQ(stats.records_read, oracle.expected_rewind_reads(no, as_of, page_lsn, n != 0))
                    << "N=" << n << " page " << no << " as of " << as_of;
                if (n != 0) {
                    ASSERT_LE(stats.records_read, n + 2u);
                }
            }
        }
    }
}

TEST(SnapshotTest, WorkloadSnapshotsMatchOracle)
{
    TempDir dir("tt-oracle");
    auto clock = std::make_shared<ManualClock>();
    auto db = Database::open(dir.path(), test::small_options(clock, 16));
    bench::Oracle oracle;
    auto spec = churn_spec(9);
    spec.leave_in_flight = true;
    oracle.add(bench::run_workload(*db, spec, clock.get()));
    const auto last = db->last_lsn().value;
    for (std::uint64_t l = 1; l <= last; l += last / 40) {
        auto snap = db->create_snapshot(AsOf::at(Lsn{l}));
        snap->wait_for_undo();
        ASSERT_EQ(test::diff_snapshot(*snap, oracle), "") << "as of " << l;
        db->drop_snapshot(snap->id());
    }
}

TEST(SnapshotTest, SideStoreMemoizes)
{
    TempDir dir("tt-side");
    auto clock = std::make_shared<ManualClock>();
    auto db = Database::open(dir.path(), test::small_options(clock));
    auto t = db->begin();
    db->create_table(t, "t");
    for (int i = 0; i < 1000; ++i) {
        db->insert(t, "t", make_key(i), "x");
    }
    db->commit(t);
    auto snap = db->create_snapshot(AsOf::at(db->last_lsn()));
    t = db->begin();
    for (int i = 0; i < 1000; i += 2) {
        db->update(t, "t", make_key(i), "y");
    }
    db->commit(t);
    snap->wait_for_undo();

    (void)snap->scan("t");
    const auto first = snap->metrics();
    EXPECT_GT(first.pages_prepared, 0u);
    (void)snap->scan("t");
    const auto second = snap->metrics();
    EXPECT_EQ(second.pages_prepared, first.pages_prepared);
    EXPECT_GT(second.side_hits, first.side_hits);
    // only rewound pages take space in the side store
    EXPECT_EQ(snap->side_store_pages(), second.pages_rewound);

    int calls = 0;
    auto producer = [&] {
        ++calls;
        Page p(db->page_size());
        p.set_page_no(kFirstVirtualPage + 5);
        p.format(PageType::BtreeLeaf);
        return p;
    };
    const auto a = snap->get_or_put(kFirstVirtualPage + 5, producer);
    const auto b = snap->get_or_put(kFirstVirtualPage + 5, producer);
    EXPECT_EQ(calls, 1);
    EXPECT_EQ(a, b);
}

TEST(SnapshotTest, SurvivesReopenAndDrop)
{
    TempDir dir("tt-reopen");
    auto clock = std::make_shared<ManualClock>();
    std::uint64_t id = 0;
    std::vector<Row> rows;
    Lsn split;
    {
        auto db = Database::open(dir.path(), test::small_options(clock));
        auto t = db->begin();
        db->create_table(t, "t");
        for (int i = 0; i < 200; ++i) {
            db->insert(t, "t", make_key(i), "first");
        }
        db->commit(t);
        rows = db->scan("t");
        auto snap = db->create_snapshot(AsOf::at(db->last_lsn()));
        id = snap->id();
        split = snap->split_lsn();
        t = db->begin();
        for (int i = 0; i < 200; ++i) {
            db->update(t, "t", make_key(i), "second");
        }
        db->commit(t);
        snap->wait_for_undo();
        (void)snap->scan("t");
    }
    auto db = Database::open(dir.path(), test::small_options(clock));
    auto snap = db->snapshot(id);
    ASSERT_TRUE(snap);
    EXPECT_EQ(snap->split_lsn(), split);
    snap->wait_for_undo();
    EXPECT_EQ(snap->scan("t"), rows);
    EXPECT_EQ(db->snapshots().size(), 1u);

    const auto side = snap->side_store_path();
    db->drop_snapshot(id);
    db->drop_snapshot(id); // idempotent
    EXPECT_EQ(snap->state(), SnapshotState::Dropped);
    EXPECT_EQ(code_of([&] { (void)snap->scan("t"); }), Errc::SnapshotDropped);
    EXPECT_FALSE(std::filesystem::exists(side));
    EXPECT_TRUE(db->snapshots().empty());
}

TEST(SnapshotTest, PinsTheLog)
{
    TempDir dir("tt-pin");
    auto clock = std::make_shared<ManualClock>();
    auto o = test::small_options(clock);
    o.segment_bytes = 16 << 10;
    o.undo_interval_micros = kSec;
    auto db = Database::open(dir.path(), o);
    auto t = db->begin();
    db->create_table(t, "t");
    db->commit(t);
    auto snap = db->create_snapshot(AsOf::at(db->last_lsn()));
    for (int b = 0; b < 20; ++b) {
        t = db->begin();
        for (int i = 0; i < 100; ++i) {
            db->insert(t, "t", make_key(b * 100 + i), std::string(60, 'p'));
        }
        db->commit(t);
        db->checkpoint();
    }
    clock->advance(10 * kSec);
    EXPECT_LE(db->truncate_log(), snap->analysis_start());
    EXPECT_LE(db->wal().first_lsn(), snap->analysis_start());
    snap->wait_for_undo();
    EXPECT_TRUE(snap->scan("t").empty());

    db->drop_snapshot(snap->id());
    const auto horizon = db->truncate_log();
    EXPECT_GT(horizon, snap->analysis_start());
    EXPECT_GT(db->wal().first_lsn(), Lsn{1});
}

TEST(SnapshotTest, ReadsRunAlongsideWriters)
{
    TempDir dir("tt-concurrent");
    auto clock = std::make_shared<ManualClock>();
    auto db = Database::open(dir.path(), test::small_options(clock, 16));
    bench::Oracle oracle;
    oracle.add(bench::run_workload(*db, churn_spec(3), clock.get()));
    auto snap = db->create_snapshot(AsOf::at(db->last_lsn()));

    std::thread writer([&] {
        auto t = db->begin();
        db->create_table(t, "busy");
        for (int i = 0; i < 3000; ++i) {
            db->insert(t, "busy", make_key(i), "w");
            if (i % 100 == 99) {
                db->commit(t);
                t = db->begin();
            }
        }
        db->commit(t);
    });
    for (int i = 0; i < 5; ++i) {
        EXPECT_EQ(test::diff_snapshot(*snap, oracle), "");
    }
    writer.join();
    EXPECT_EQ(test::diff_snapshot(*snap, oracle), "");
}
