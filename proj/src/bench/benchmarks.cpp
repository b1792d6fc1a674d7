#include "chronodb/bench/benchmarks.hpp"
#include "chronodb/bench/oracle.hpp"
#include "chronodb/bench/restore.hpp"

#include <chrono>

namespace chronodb::bench {

namespace fs = std::filesystem;

namespace {

double millis_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Options bench_options(const BenchConfig &cfg, std::uint32_t n, std::shared_ptr<ManualClock> clock)
{
    Options o;
    o.page_size = cfg.page_size;
    o.cache_pages = cfg.cache_pages;
    o.preformat_n = n;
    o.clock = std::move(clock);
    return o;
}

} // namespace

MetricsReport bench_logging_overhead(const WorkloadSpec &spec, const std::vector<std::uint32_t> &ns,
                                     const BenchConfig &cfg, std::vector<OverheadTrial> *trials)
{
    MetricsReport report;
    std::vector<std::uint32_t> all = ns;
    all.push_back(0);
    for (const auto n : all) {
        const auto dir = cfg.work_dir / ("overhead-" + format_n(n));
        fs::remove_all(dir);
        auto clock = std::make_shared<ManualClock>();
        auto db = Database::open(dir, bench_options(cfg, n, clock));
        Oracle oracle;
        oracle.attach(*db);
        const auto result = run_workload(*db, spec, clock.get());
        MetricsRow row;
        row.label = "overhead";
        row.n = format_n(n);
        row.log_bytes = db->wal().stats().bytes_appended;
        row.txn_throughput = result.seconds > 0 ? static_cast<double>(result.counters.commits) / result.seconds : 0;
        report.rows.push_back(row);
        if (trials != nullptr) {
            OverheadTrial t;
            t.n = n;
            t.log_bytes = row.log_bytes;
            t.periodic_images = db->stats().periodic_images;
            t.expected_images = oracle.expected_periodic_images(n);
            for (const auto p : oracle.pages()) {
                t.max_page_mutations = std::max(t.max_page_mutations, oracle.mutations(p));
            }
            trials->push_back(t);
        }
        db.reset();
        fs::remove_all(dir);
    }
    return report;
}

MetricsReport bench_as_of_latency(const WorkloadSpec &spec, const std::vector<std::int64_t> &ages_micros,
                                  const BenchConfig &cfg, std::vector<LatencyTrial> *trials)
{
    MetricsReport report;
    const auto dir = cfg.work_dir / "latency";
    fs::remove_all(dir);
    auto clock = std::make_shared<ManualClock>();
    auto opts = bench_options(cfg, cfg.preformat_n, clock);
    opts.undo_interval_micros = std::numeric_limits<std::int64_t>::max() / 4;
    auto db = Database::open(dir, opts);
    run_workload(*db, spec, clock.get());
    const auto tables = db->tables();
    const auto now = clock->now_micros();
    for (const auto age : ages_micros) {
        const auto t0 = std::chrono::steady_clock::now();
        auto snap = db->create_snapshot(AsOf::time(now - age));
        const double create_ms = millis_since(t0);
        snap->wait_for_undo();
        const auto before = snap->metrics();
        const auto q0 = std::chrono::steady_clock::now();
        if (!tables.empty()) {
            if (snap->table(tables.front().name)) {
                (void)snap->scan(tables.front().name);
            }
        }
        const double query_ms = millis_since(q0);
        const auto m = snap->metrics();
        MetricsRow row;
        row.label = "latency-age-" + std::to_string(age / 1000) + "ms";
        row.n = format_n(cfg.preformat_n);
        row.log_bytes = db->wal().stats().bytes_appended;
        row.snapshot_create_millis = create_ms;
        row.as_of_query_millis = query_ms;
        row.undo_records_read = m.undo_records_read - before.undo_records_read;
        row.pages_prepared = m.pages_prepared - before.pages_prepared;
        report.rows.push_back(row);
        if (trials != nullptr) {
            trials->push_back(LatencyTrial{age, snap->split_lsn(), m.analysis_records, row.undo_records_read,
                                           row.pages_prepared});
        }
        db->drop_snapshot(snap->id());
        db->checkpoint();
    }
    db.reset();
    fs::remove_all(dir);
    return report;
}

MetricsReport bench_restore(const WorkloadSpec &spec, const BenchConfig &cfg)
{
    MetricsReport report;
    const auto dir = cfg.work_dir / "restore-src";
    const auto target = cfg.work_dir / "restore-dst";
    const auto backup = cfg.work_dir / "restore.backup";
    fs::remove_all(dir);
    auto clock = std::make_shared<ManualClock>();
    auto opts = bench_options(cfg, cfg.preformat_n, clock);
    auto db = Database::open(dir, opts);
    auto half = spec;
    half.op_count = spec.op_count / 2;
    run_workload(*db, half, clock.get());
    db->backup(backup);
    half.seed = spec.seed + 1;
    run_workload(*db, half, clock.get());
    const Lsn to = db->last_lsn();
    const auto tables = db->tables();

    const auto s0 = std::chrono::steady_clock::now();
    auto snap = db->create_snapshot(AsOf::at(to));
    if (!tables.empty()) {
        (void)snap->get(tables.front().name, make_key(0));
    }
    const double snap_ms = millis_since(s0);
    const auto m = snap->metrics();

    auto restored = restore_baseline(backup, dir, target, to, opts);
    MetricsRow row;
    row.label = "restore";
    row.n = format_n(cfg.preformat_n);
    row.log_bytes = db->wal().stats().bytes_appended;
    row.snapshot_create_millis = snap_ms;
    row.undo_records_read = m.undo_records_read;
    row.pages_prepared = m.pages_prepared;
    row.restore_baseline_millis = restored.millis;
    row.restore_pages_copied = restored.pages_copied;
    row.timing_ratio = snap_ms > 0 ? restored.millis / snap_ms : 0;
    report.rows.push_back(row);

    restored.db.reset();
    db->drop_snapshot(snap->id());
    db.reset();
    fs::remove_all(dir);
    fs::remove_all(target);
    fs::remove(backup);
    fs::remove(fs::path(backup).concat(".lsn"));
    return report;
}

} // namespace chronodb::bench
