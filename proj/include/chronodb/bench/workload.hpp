#pragma once

#include "chronodb/database.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace chronodb::bench {

struct OpMix {
    unsigned insert = 50;
    unsigned update = 25;
    unsigned erase = 15;
    unsigned drop_table = 1;
};

struct WorkloadSpec {
    std::uint64_t seed = 1;
    std::size_t table_count = 3; // live tables the generator keeps around
    std::size_t key_space = 4000;
    OpMix mix;
    std::size_t min_txn_ops = 1;
    std::size_t max_txn_ops = 10;
    std::size_t op_count = 5000;
    std::int64_t clock_step_micros = 1000;
    std::size_t min_value = 8;
    std::size_t max_value = 80;
    double abort_probability = 0.1;
    std::size_t concurrency = 3; // interleaved open transactions
    std::size_t checkpoint_every = 0; // ops between checkpoints; 0 = never
    bool leave_in_flight = false;     // keep the last open txns uncommitted
};

struct TraceOp {
    enum class Kind { CreateTable, DropTable, Insert, Update, Erase };
    Kind kind = Kind::Insert;
    std::string table;
    std::string key;
    std::string value;
    TableInfo info; // CreateTable only
};

struct CommittedTxn {
    TxnId id = 0;
    Lsn commit_lsn;
    std::vector<TraceOp> ops;
};

struct WorkloadCounters {
    std::uint64_t ops = 0;
    std::uint64_t commits = 0;
    std::uint64_t aborts = 0;
    std::uint64_t creates = 0;
    std::uint64_t drops = 0;
    std::uint64_t inserts = 0;
    std::uint64_t updates = 0;
    std::uint64_t erases = 0;
};

struct WorkloadResult {
    std::vector<CommittedTxn> committed; // commit order
    WorkloadCounters counters;
    std::vector<Txn> in_flight;
    double seconds = 0;
};

// Deterministic single-threaded generator. Interleaves up to
// spec.concurrency transactions without ever contending on a lock. `clock`
// (optional) is advanced by clock_step_micros per operation.
WorkloadResult run_workload(Database &db, const WorkloadSpec &spec, ManualClock *clock = nullptr);

[[nodiscard]] std::string make_key(std::uint64_t k);

} // namespace chronodb::bench
