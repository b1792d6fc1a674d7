// chronodb: command-line front end for the embedded engine.

#include "chronodb/bench/benchmarks.hpp"
#include "chronodb/bench/oracle.hpp"
#include "chronodb/bench/workload.hpp"
#include "chronodb/database.hpp"
#include "chronodb/error.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace chronodb;

namespace {

struct Global {
    std::string db;
    std::size_t page_cache = 4096;
    std::string preformat_n = "64";
    std::string undo_interval = "24h";
    std::uint64_t seed = 1;
    std::string csv;
    std::size_t page_size = 8192;
};

bool manual_clock() { return std::getenv("CHRONODB_CLOCK") && std::string(std::getenv("CHRONODB_CLOCK")) == "manual"; }

// The injected clock lives in <db>/clock and moves 1 ms per command.
class ClockFile
{
public:
    explicit ClockFile(const fs::path &dir) : path_(dir / "clock")
    {
        std::int64_t t = ManualClock::kDefaultEpoch;
        if (std::ifstream in(path_); in) {
            in >> t;
        }
        clock_ = std::make_shared<ManualClock>(t);
    }
    void save() const
    {
        clock_->advance(1000);
        std::ofstream out(path_, std::ios::trunc);
        out << clock_->now_micros() << "\n";
    }
    [[nodiscard]] const std::shared_ptr<ManualClock> &clock() const { return clock_; }

private:
    fs::path path_;
    std::shared_ptr<ManualClock> clock_;
};

std::uint32_t parse_n(const std::string &s)
{
    if (s == "off" || s == "inf") {
        return 0;
    }
    return static_cast<std::uint32_t>(std::stoul(s));
}

Options make_options(const Global &g, const std::shared_ptr<Clock> &clock)
{
    Options o;
    o.page_size = g.page_size;
    o.cache_pages = g.page_cache;
    o.preformat_n = parse_n(g.preformat_n);
    const auto interval = parse_duration(g.undo_interval);
    if (!interval) {
        throw Error(Errc::InvalidArgument, "bad --undo-interval " + g.undo_interval);
    }
    o.undo_interval_micros = *interval;
    o.clock = clock;
    return o;
}

// Opens the database for one command and keeps the clock file in step.
struct Session {
    std::optional<ClockFile> clock_file;
    std::unique_ptr<Database> db;

    Session(const Global &g, bool must_exist)
    {
        if (g.db.empty()) {
            throw Error(Errc::InvalidArgument, "--db is required");
        }
        if (must_exist && !fs::exists(fs::path(g.db) / "data.cdb")) {
            throw Error(Errc::InvalidArgument, "no database at " + g.db + " (run init)");
        }
        fs::create_directories(g.db);
        std::shared_ptr<Clock> clock;
        if (manual_clock()) {
            clock_file.emplace(g.db);
            clock = clock_file->clock();
        }
        db = Database::open(g.db, make_options(g, clock));
    }
    ~Session()
    {
        db.reset();
        if (clock_file) {
            clock_file->save();
        }
    }
    void tick() const
    {
        if (clock_file) {
            clock_file->clock()->advance(1000);
        }
    }
    [[nodiscard]] ManualClock *manual() const { return clock_file ? clock_file->clock().get() : nullptr; }
};

AsOf parse_as_of(const std::string &text)
{
    if (!text.empty() && text.find_first_not_of("0123456789") == std::string::npos) {
        return AsOf::at(Lsn{std::stoull(text)});
    }
    if (text.rfind("lsn:", 0) == 0) {
        return AsOf::at(Lsn{std::stoull(text.substr(4))});
    }
    const auto t = parse_timestamp(text);
    if (!t) {
        throw Error(Errc::InvalidArgument, "bad --as-of value '" + text + "' (timestamp or LSN)");
    }
    return AsOf::time(*t);
}

std::shared_ptr<Snapshot> require_snapshot(Database &db, std::uint64_t id)
{
    auto s = db.snapshot(id);
    if (!s) {
        throw Error(Errc::InvalidArgument, "no snapshot " + std::to_string(id));
    }
    return s;
}

void print_rows(const std::vector<Row> &rows)
{
    for (const auto &r : rows) {
        std::cout << r.key << '\t' << r.value << '\n';
    }
}

void emit(const bench::MetricsReport &report, const Global &g)
{
    if (!g.csv.empty()) {
        report.write_csv(g.csv);
    }
    std::cout << report.to_csv();
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"chronodb: embedded storage engine with as-of snapshots"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--db", g.db, "database directory");
    app.add_option("--page-cache", g.page_cache, "page cache size in pages");
    app.add_option("--preformat-n", g.preformat_n, "full page image every N page mutations, or 'off'");
    app.add_option("--undo-interval", g.undo_interval, "retention window for as-of snapshots (e.g. 24h, 90m)");
    app.add_option("--seed", g.seed, "workload seed");
    app.add_option("--csv", g.csv, "write metrics CSV here");

    auto *init = app.add_subcommand("init", "create a database");
    init->add_option("--page-size", g.page_size, "page size in bytes (power of two, 512..32768)");

    auto *status = app.add_subcommand("status", "print log position, clock and tables");

    auto *table = app.add_subcommand("table", "manage tables");
    table->require_subcommand(1);
    std::string table_name;
    auto *table_create = table->add_subcommand("create", "create a table");
    table_create->add_option("name", table_name)->required();
    auto *table_drop = table->add_subcommand("drop", "drop a table");
    table_drop->add_option("name", table_name)->required();
    auto *table_list = table->add_subcommand("list", "list tables");

    std::string key, value;
    auto *put = app.add_subcommand("put", "insert or update a row");
    put->add_option("--table", table_name)->required();
    put->add_option("key", key)->required();
    put->add_option("value", value)->required();
    auto *del = app.add_subcommand("del", "delete a row");
    del->add_option("--table", table_name)->required();
    del->add_option("key", key)->required();

    auto *workload = app.add_subcommand("workload", "synthetic workload");
    workload->require_subcommand(1);
    bench::WorkloadSpec spec;
    auto *workload_run = workload->add_subcommand("run", "run the synthetic workload");
    workload_run->add_option("--ops", spec.op_count, "operations");
    workload_run->add_option("--tables", spec.table_count, "live tables");
    workload_run->add_option("--keys", spec.key_space, "key space per table");
    workload_run->add_option("--checkpoint-every", spec.checkpoint_every, "ops between checkpoints");

    auto *checkpoint = app.add_subcommand("checkpoint", "take a checkpoint");

    auto *snapshot = app.add_subcommand("snapshot", "as-of snapshots");
    snapshot->require_subcommand(1);
    std::string as_of;
    std::uint64_t snap_id = 0;
    auto *snap_create = snapshot->add_subcommand(
        "create", "create a snapshot; commits stamped at or before the time are included");
    snap_create->add_option("--as-of", as_of, "'YYYY-MM-DD HH:MM:SS.mmm' (UTC) or an LSN")->required();
    auto *snap_drop = snapshot->add_subcommand("drop", "drop a snapshot");
    snap_drop->add_option("id", snap_id)->required();
    auto *snap_list = snapshot->add_subcommand("list", "list snapshots");

    auto *query = app.add_subcommand("query", "read rows");
    query->require_subcommand(1);
    std::optional<std::uint64_t> query_snapshot;
    std::optional<std::string> lo, hi;
    auto *query_get = query->add_subcommand("get", "point lookup");
    query_get->add_option("--table", table_name)->required();
    query_get->add_option("--snapshot", query_snapshot);
    query_get->add_option("key", key)->required();
    auto *query_scan = query->add_subcommand("scan", "range scan [from, to)");
    query_scan->add_option("--table", table_name)->required();
    query_scan->add_option("--snapshot", query_snapshot);
    query_scan->add_option("--from", lo);
    query_scan->add_option("--to", hi);

    auto *copy = app.add_subcommand("copy", "copy a table out of a snapshot into the live database");
    std::string into;
    copy->add_option("--from-snapshot", snap_id)->required();
    copy->add_option("--table", table_name)->required();
    copy->add_option("--into", into)->required();

    auto *bench_cmd = app.add_subcommand("bench", "benchmarks (CSV)");
    bench_cmd->require_subcommand(1);
    bench::WorkloadSpec bench_spec;
    std::size_t bench_page = 1024;
    auto *bench_overhead = bench_cmd->add_subcommand("overhead", "log bytes and throughput per image interval");
    auto *bench_latency = bench_cmd->add_subcommand("latency", "as-of cost against snapshot age");
    auto *bench_restore = bench_cmd->add_subcommand("restore", "restore-and-roll-forward against a snapshot");
    for (auto *b : {bench_overhead, bench_latency, bench_restore}) {
        b->add_option("--ops", bench_spec.op_count, "workload operations");
        b->add_option("--page-size", bench_page, "page size");
    }

    auto *verify = app.add_subcommand("verify", "verification");
    verify->require_subcommand(1);
    std::size_t points = 32;
    auto *verify_asof = verify->add_subcommand("asof", "random history, then compare snapshots with the oracle");
    verify_asof->add_option("--ops", bench_spec.op_count, "workload operations");
    verify_asof->add_option("--points", points, "sampled split points");

    auto *log = app.add_subcommand("log", "log maintenance");
    log->require_subcommand(1);
    auto *log_truncate = log->add_subcommand("truncate", "drop log segments below the retention horizon");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*init) {
            if (g.db.empty()) {
                throw Error(Errc::InvalidArgument, "--db is required");
            }
            if (fs::exists(fs::path(g.db) / "data.cdb")) {
                throw Error(Errc::InvalidArgument, "database already exists at " + g.db);
            }
            Session s(g, false);
            std::cout << "initialized " << g.db << " page_size=" << s.db->page_size() << "\n";
        } else if (*status) {
            Session s(g, true);
            std::cout << "last_lsn " << s.db->last_lsn() << "\n";
            std::cout << "now " << format_timestamp(s.db->clock().now_micros()) << "\n";
            std::cout << "pages " << s.db->page_count() << "\n";
            std::cout << "log_first_lsn " << s.db->wal().first_lsn() << "\n";
        } else if (*table) {
            Session s(g, true);
            if (*table_list) {
                for (const auto &t : s.db->tables()) {
                    std::cout << t.name << "\troot=" << t.root << "\tcreated=" << t.created << "\n";
                }
            } else {
                auto txn = s.db->begin();
                if (*table_create) {
                    s.db->create_table(txn, table_name);
                } else {
                    s.db->drop_table(txn, table_name);
                }
                s.db->commit(txn);
                s.tick();
            }
        } else if (*put || *del) {
            Session s(g, true);
            auto txn = s.db->begin();
            if (*put) {
                if (s.db->get(table_name, key)) {
                    s.db->update(txn, table_name, key, value);
                } else {
                    s.db->insert(txn, table_name, key, value);
                }
            } else {
                s.db->erase(txn, table_name, key);
            }
            s.db->commit(txn);
            s.tick();
        } else if (*workload) {
            Session s(g, true);
            spec.seed = g.seed;
            const auto r = bench::run_workload(*s.db, spec, s.manual());
            std::cout << "ops " << r.counters.ops << " commits " << r.counters.commits << " aborts "
                      << r.counters.aborts << " drops " << r.counters.drops << " last_lsn " << s.db->last_lsn()
                      << "\n";
        } else if (*checkpoint) {
            Session s(g, true);
            std::cout << "checkpoint " << s.db->checkpoint() << "\n";
        } else if (*snapshot) {
            Session s(g, true);
            if (*snap_create) {
                auto snap = s.db->create_snapshot(parse_as_of(as_of));
                snap->wait_for_undo();
                std::cout << "snapshot " << snap->id() << " split_lsn " << snap->split_lsn() << "\n";
            } else if (*snap_drop) {
                s.db->drop_snapshot(snap_id);
            } else if (*snap_list) {
                for (const auto &snap : s.db->snapshots()) {
                    std::cout << snap->id() << "\tsplit_lsn=" << snap->split_lsn()
                              << "\tundo=" << (snap->undo_complete() ? "complete" : "running") << "\n";
                }
            }
        } else if (*query) {
            Session s(g, true);
            if (query_snapshot) {
                auto snap = require_snapshot(*s.db, *query_snapshot);
                if (*query_get) {
                    const auto v = snap->get(table_name, key);
                    if (!v) {
                        return 1;
                    }
                    std::cout << *v << "\n";
                } else {
                    print_rows(snap->scan(table_name, lo, hi));
                }
            } else if (*query_get) {
                const auto v = s.db->get(table_name, key);
                if (!v) {
                    return 1;
                }
                std::cout << *v << "\n";
            } else {
                print_rows(s.db->scan(table_name, lo, hi));
            }
        } else if (*copy) {
            Session s(g, true);
            auto snap = require_snapshot(*s.db, snap_id);
            const auto rows = snap->scan(table_name);
            auto txn = s.db->begin();
            if (!s.db->table(into)) {
                s.db->create_table(txn, into);
            }
            std::size_t copied = 0;
            for (const auto &r : rows) {
                if (s.db->get(into, r.key)) {
                    s.db->update(txn, into, r.key, r.value);
                } else {
                    s.db->insert(txn, into, r.key, r.value);
                }
                ++copied;
            }
            s.db->commit(txn);
            s.tick();
            std::cout << "copied " << copied << " rows into " << into << "\n";
        } else if (*bench_cmd) {
            bench::BenchConfig cfg;
            cfg.work_dir = g.db.empty() ? fs::temp_directory_path() / "chronodb-bench" : fs::path(g.db);
            fs::create_directories(cfg.work_dir);
            cfg.page_size = bench_page;
            cfg.cache_pages = g.page_cache;
            cfg.preformat_n = parse_n(g.preformat_n);
            bench_spec.seed = g.seed;
            if (*bench_overhead) {
                emit(bench::bench_logging_overhead(bench_spec, {16, 64}, cfg), g);
            } else if (*bench_latency) {
                bench_spec.checkpoint_every = std::max<std::size_t>(1, bench_spec.op_count / 20);
                const auto span = static_cast<std::int64_t>(bench_spec.op_count) * bench_spec.clock_step_micros;
                std::vector<std::int64_t> ages;
                for (int i = 1; i <= 8; ++i) {
                    ages.push_back(span * i / 9);
                }
                emit(bench::bench_as_of_latency(bench_spec, ages, cfg), g);
            } else {
                emit(bench::bench_restore(bench_spec, cfg), g);
            }
        } else if (*verify) {
            if (g.db.empty()) {
                throw Error(Errc::InvalidArgument, "--db is required");
            }
            fs::remove_all(g.db);
            auto clock = std::make_shared<ManualClock>();
            auto opts = make_options(g, clock);
            opts.page_size = 1024;
            auto db = Database::open(g.db, opts);
            bench::Oracle oracle;
            oracle.attach(*db);
            bench_spec.seed = g.seed;
            bench_spec.checkpoint_every = 400;
            bench_spec.leave_in_flight = true;
            oracle.add(bench::run_workload(*db, bench_spec, clock.get()));
            std::mt19937_64 rng(g.seed);
            std::size_t failures = 0;
            for (std::size_t i = 0; i < points; ++i) {
                const Lsn at{1 + rng() % db->last_lsn().value};
                auto snap = db->create_snapshot(AsOf::at(at));
                snap->wait_for_undo();
                const auto expect = oracle.state_at(snap->split_lsn());
                bool ok = snap->tables() == expect.catalog;
                for (const auto &t : expect.catalog) {
                    ok = ok && snap->scan(t.name) == expect.tables.at(t.name);
                }
                if (!ok) {
                    ++failures;
                    std::cout << "DIVERGENCE at split_lsn " << snap->split_lsn() << "\n";
                }
                db->drop_snapshot(snap->id());
            }
            std::cout << (failures == 0 ? "PASS" : "FAIL") << " " << points << " points, " << failures
                      << " divergences\n";
            return failures == 0 ? 0 : 1;
        } else if (*log) {
            Session s(g, true);
            (void)log_truncate;
            const auto horizon = s.db->truncate_log();
            std::cout << "horizon " << horizon << " first_lsn " << s.db->wal().first_lsn() << "\n";
        }
    } catch (const Error &e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
