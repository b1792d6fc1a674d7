// Log segments, record groups, torn tails and truncation.
#include "chronodb/error.hpp"
#include "chronodb/log_record.hpp"
#include "chronodb/wal.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

using namespace chronodb;
using chronodb::test::TempDir;
namespace fs = std::filesystem;

namespace {

LogRecord insert_rec(TxnId txn, PageNo page, std::string row)
{
    LogRecord r;
    r.txn = txn;
    r.page = page;
    r.body = InsertRow{2, 0, std::move(row)};
    return r;
}

std::vector<fs::path> segment_files(const fs::path &dir)
{
    std::vector<fs::path> out;
    for (const auto &e : fs::directory_iterator(dir)) {
        out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

WalOptions opts_for(const fs::path &dir, std::size_t segment_bytes = 16u << 20)
{
    WalOptions o;
    o.dir = dir;
    o.segment_bytes = segment_bytes;
    return o;
}

} // namespace

TEST(RecordCodec, EveryKindRoundTrips)
{
    std::vector<LogRecord> recs;
    auto add = [&](RecordBody body, PageNo page = kNilPage) {
        LogRecord r;
        r.lsn = Lsn{recs.size() + 10};
        r.txn = 3;
        r.prev_lsn = Lsn{4};
        r.page = page;
        r.prev_page_lsn = Lsn{2};
        r.flags = kFlagSmo | kFlagInGroup;
        r.body = std::move(body);
        recs.push_back(std::move(r));
    };
    add(FormatPage{PageType::BtreeInternal, FormatPrior::Empty, PageType::BtreeLeaf}, 5);
    add(PreformatPage{PreformatReason::Realloc, std::string(512, '\x01')}, 5);
    add(InsertRow{7, 3, encode_leaf_row("k", "v")}, 5);
    add(DeleteRow{7, 1, encode_leaf_row("key", "")}, 5);
    add(UpdateRow{7, 0, "before", "after"}, 5);
    add(Compensation{Lsn{9}, Lsn{8}, DeleteRow{7, 0, "r"}}, 5);
    add(TxnBegin{});
    add(TxnCommit{123456789});
    add(TxnAbortEnd{});
    add(AllocPage{44, PageType::BtreeLeaf, true}, 1);
    add(DeallocPage{44}, 1);
    add(CheckpointBegin{99});
    add(CheckpointEnd{Lsn{21}, 17, {ActiveTxn{4, Lsn{5}, Lsn{6}}}});
    for (const auto &r : recs) {
        EXPECT_EQ(decode_record(encode_record(r)), r) << to_string(r.kind());
    }
}

TEST(RecordCodec, LeafAndInternalRows)
{
    const auto leaf = encode_leaf_row("apple", "red");
    EXPECT_EQ(row_key(leaf), "apple");
    EXPECT_EQ(row_value(leaf), "red");
    const auto internal = encode_internal_row("m", 1234567);
    EXPECT_EQ(row_key(internal), "m");
    EXPECT_EQ(row_child(internal), 1234567u);
}

TEST(RecordCodec, PreformatIsNotAMutation)
{
    LogRecord r;
    r.page = 3;
    r.body = PreformatPage{};
    EXPECT_FALSE(is_page_mutation(r));
    r.body = InsertRow{};
    EXPECT_TRUE(is_page_mutation(r));
    r.page = kNilPage;
    r.body = TxnCommit{};
    EXPECT_FALSE(is_page_mutation(r));
}

TEST(WalTest, DenseLsnsAndReadBack)
{
    TempDir dir("wal-dense");
    ManualClock clock;
    std::vector<LogRecord> written;
    {
        Wal wal(opts_for(dir / "wal", 2048), clock);
        for (int i = 0; i < 200; ++i) {
            auto r = insert_rec(1, 3, std::string(30, static_cast<char>('a' + i % 26)));
            EXPECT_EQ(wal.append(r), Lsn{static_cast<std::uint64_t>(i + 1)});
            written.push_back(r);
        }
        wal.flush_all();
        EXPECT_GT(wal.segment_count(), 2u);
        EXPECT_EQ(wal.read(Lsn{150}), written[149]);
    }
    Wal wal(opts_for(dir / "wal", 2048), clock);
    EXPECT_EQ(wal.first_lsn(), Lsn{1});
    EXPECT_EQ(wal.last_lsn(), Lsn{200});
    std::size_t n = 0;
    wal.scan(Lsn{1}, Lsn{200}, [&](const LogRecord &r) {
        EXPECT_EQ(r, written[n]);
        ++n;
        return true;
    });
    EXPECT_EQ(n, 200u);
    EXPECT_THROW((void)wal.read(Lsn{201}), Error);
}

TEST(WalTest, CommitStampsNeverDecrease)
{
    TempDir dir("wal-stamp");
    ManualClock clock(1000);
    Wal wal(opts_for(dir / "wal"), clock);
    LogRecord a;
    a.txn = 1;
    a.body = TxnCommit{};
    wal.append(a);
    clock.set(500); // clock steps backwards
    LogRecord b;
    b.txn = 2;
    b.body = TxnCommit{};
    wal.append(b);
    const auto ta = std::get<TxnCommit>(wal.read(a.lsn).body).wall_micros;
    const auto tb = std::get<TxnCommit>(wal.read(b.lsn).body).wall_micros;
    EXPECT_EQ(ta, 1000);
    EXPECT_GE(tb, ta);
}

TEST(WalTest, TornTailIsCut)
{
    TempDir dir("wal-torn");
    ManualClock clock;
    {
        Wal wal(opts_for(dir / "wal"), clock);
        for (int i = 0; i < 10; ++i) {
            auto r = insert_rec(1, 3, "row" + std::to_string(i));
            wal.append(r);
        }
        wal.flush_all();
    }
    const auto files = segment_files(dir / "wal");
    ASSERT_EQ(files.size(), 1u);
    fs::resize_file(files[0], fs::file_size(files[0]) - 3);
    Wal wal(opts_for(dir / "wal"), clock);
    EXPECT_EQ(wal.last_lsn(), Lsn{9});
    auto r = insert_rec(1, 3, "again");
    EXPECT_EQ(wal.append(r), Lsn{10});
}

TEST(WalTest, OpenGroupIsDroppedOnRecovery)
{
    TempDir dir("wal-group");
    ManualClock clock;
    {
        Wal wal(opts_for(dir / "wal"), clock);
        auto a = insert_rec(1, 3, "a");
        wal.append(a);
        wal.begin_group();
        auto b = insert_rec(1, 4, "b");
        auto c = insert_rec(1, 5, "c");
        wal.append(b);
        wal.append(c);
        EXPECT_TRUE(wal.in_group());
        EXPECT_EQ(wal.stable_lsn(), Lsn{1});
        // the group is still open, so the crash can only keep record 1
        wal.crash(Lsn{3});
        EXPECT_EQ(wal.durable_stable_lsn(), Lsn{1});
    }
    Wal wal(opts_for(dir / "wal"), clock);
    EXPECT_EQ(wal.last_lsn(), Lsn{1});
}

TEST(WalTest, ClosedGroupSurvives)
{
    TempDir dir("wal-group2");
    ManualClock clock;
    {
        Wal wal(opts_for(dir / "wal"), clock);
        wal.begin_group();
        auto b = insert_rec(1, 4, "b");
        auto c = insert_rec(1, 5, "c");
        wal.append(b);
        wal.append(c);
        wal.end_group();
        EXPECT_EQ(wal.read(Lsn{1}).flags & kFlagInGroup, kFlagInGroup);
        EXPECT_EQ(wal.read(Lsn{2}).flags & kFlagGroupEnd, kFlagGroupEnd);
        wal.crash(Lsn{2});
    }
    Wal wal(opts_for(dir / "wal"), clock);
    EXPECT_EQ(wal.last_lsn(), Lsn{2});
}

TEST(WalTest, CrashKeepsOnlyTheDurablePrefix)
{
    TempDir dir("wal-crash");
    ManualClock clock;
    {
        Wal wal(opts_for(dir / "wal"), clock);
        for (int i = 0; i < 20; ++i) {
            auto r = insert_rec(1, 3, "x");
            wal.append(r);
        }
        wal.crash(Lsn{12});
        EXPECT_THROW(
            {
                auto r = insert_rec(1, 3, "y");
                wal.append(r);
            },
            Error);
    }
    Wal wal(opts_for(dir / "wal"), clock);
    EXPECT_EQ(wal.last_lsn(), Lsn{12});
}

TEST(WalTest, CrashNeverLosesFlushedRecords)
{
    TempDir dir("wal-crash2");
    ManualClock clock;
    Lsn flushed;
    {
        Wal wal(opts_for(dir / "wal"), clock);
        for (int i = 0; i < 20; ++i) {
            auto r = insert_rec(1, 3, "x");
            wal.append(r);
        }
        wal.flush_up_to(Lsn{5});
        flushed = wal.flushed_lsn();
        EXPECT_GE(flushed, Lsn{5});
        wal.crash(Lsn{2});
    }
    Wal wal(opts_for(dir / "wal"), clock);
    EXPECT_EQ(wal.last_lsn(), flushed);
}

TEST(WalTest, StopAfterCutsTheLog)
{
    TempDir dir("wal-stop");
    ManualClock clock;
    {
        Wal wal(opts_for(dir / "wal", 1024), clock);
        for (int i = 0; i < 100; ++i) {
            auto r = insert_rec(1, 3, std::string(40, 'z'));
            wal.append(r);
        }
        wal.flush_all();
    }
    auto o = opts_for(dir / "wal", 1024);
    o.stop_after = Lsn{37};
    {
        Wal wal(o, clock);
        EXPECT_EQ(wal.last_lsn(), Lsn{37});
        auto r = insert_rec(2, 3, "new");
        EXPECT_EQ(wal.append(r), Lsn{38});
        wal.flush_all();
    }
    Wal wal(opts_for(dir / "wal", 1024), clock);
    EXPECT_EQ(wal.last_lsn(), Lsn{38});
    EXPECT_EQ(wal.read(Lsn{38}).txn, 2u);
}

TEST(WalTest, TruncateRemovesWholeSegmentsOnly)
{
    TempDir dir("wal-trunc");
    ManualClock clock;
    Wal wal(opts_for(dir / "wal", 1024), clock);
    for (int i = 0; i < 300; ++i) {
        auto r = insert_rec(1, 3, std::string(40, 'q'));
        wal.append(r);
    }
    wal.flush_all();
    const auto before = wal.segment_count();
    const auto bytes = wal.disk_bytes();
    const auto first = wal.truncate_before(Lsn{150});
    EXPECT_LE(first, Lsn{150});
    EXPECT_GT(first, Lsn{1});
    EXPECT_LT(wal.segment_count(), before);
    EXPECT_LT(wal.disk_bytes(), bytes);
    EXPECT_EQ(wal.first_lsn(), first);
    EXPECT_NO_THROW((void)wal.read(Lsn{150}));
    try {
        (void)wal.read(first.prev());
        FAIL() << "read below the horizon";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::TruncatedLsn);
    }
    // never past the horizon, even when asked to cut everything
    wal.truncate_before(Lsn{10'000});
    EXPECT_EQ(wal.last_lsn(), Lsn{300});
    EXPECT_NO_THROW((void)wal.read(Lsn{300}));
}

TEST(WalTest, LogBudget)
{
    TempDir dir("wal-full");
    ManualClock clock;
    auto o = opts_for(dir / "wal", 1024);
    o.max_log_bytes = 4096;
    Wal wal(o, clock);
    try {
        for (int i = 0; i < 1000; ++i) {
            auto r = insert_rec(1, 3, std::string(40, 'q'));
            wal.append(r);
        }
        FAIL() << "log never filled";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::LogFull);
    }
}

TEST(WalTest, ImageIndex)
{
    TempDir dir("wal-img");
    ManualClock clock;
    Wal wal(opts_for(dir / "wal"), clock);
    for (int i = 0; i < 10; ++i) {
        LogRecord r;
        r.page = 7;
        r.body = i % 3 == 0 ? RecordBody{PreformatPage{PreformatReason::Periodic, std::string(512, 'i')}}
                            : RecordBody{InsertRow{2, 0, "r"}};
        wal.append(r);
    }
    // images at 1, 4, 7, 10
    EXPECT_EQ(wal.image_count(), 4u);
    EXPECT_EQ(wal.first_image_after(7, Lsn{1}, Lsn{10}), Lsn{4});
    EXPECT_EQ(wal.first_image_after(7, Lsn{0}, Lsn{10}), Lsn{1});
    EXPECT_EQ(wal.first_image_after(7, Lsn{7}, Lsn{9}), std::nullopt);
    EXPECT_EQ(wal.first_image_after(8, Lsn{0}, Lsn{10}), std::nullopt);
}

TEST(WalTest, CheckpointIndex)
{
    TempDir dir("wal-ckpt");
    ManualClock clock(5000);
    {
        Wal wal(opts_for(dir / "wal"), clock);
        LogRecord b;
        b.body = CheckpointBegin{};
        wal.append(b);
        LogRecord e;
        e.body = CheckpointEnd{b.lsn, 1, {}};
        wal.append(e);
        LogRecord open;
        open.body = CheckpointBegin{};
        wal.append(open); // never completed
        wal.flush_all();
    }
    Wal wal(opts_for(dir / "wal"), clock);
    const auto cps = wal.checkpoints();
    ASSERT_EQ(cps.size(), 1u);
    EXPECT_EQ(cps[0].begin, Lsn{1});
    EXPECT_EQ(cps[0].end, Lsn{2});
    EXPECT_EQ(cps[0].wall_micros, 5000);
}

TEST(MasterRecordTest, RoundTripAndCorruption)
{
    TempDir dir("master");
    const auto path = dir / "master";
    EXPECT_EQ(read_master(path), std::nullopt);
    write_master(path, MasterRecord{Lsn{77}, Lsn{12}}, false);
    const auto m = read_master(path);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->checkpoint, Lsn{77});
    EXPECT_EQ(m->horizon, Lsn{12});
    {
        std::fstream raw(path, std::ios::in | std::ios::out | std::ios::binary);
        raw.seekp(2);
        raw.put('\x55');
    }
    EXPECT_THROW((void)read_master(path), Error);
}
