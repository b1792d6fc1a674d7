#pragma once

#include "chronodb/bench/metrics.hpp"
#include "chronodb/bench/workload.hpp"

#include <filesystem>
#include <vector>

namespace chronodb::bench {

struct BenchConfig {
    std::filesystem::path work_dir;
    std::size_t page_size = 1024;
    std::size_t cache_pages = 4096;
    std::uint32_t preformat_n = 64;
};

struct OverheadTrial {
    std::uint32_t n = 0;
    std::uint64_t log_bytes = 0;
    std::uint64_t periodic_images = 0;
    std::uint64_t expected_images = 0; // sum of floor(mutations / n)
    std::uint64_t max_page_mutations = 0;
};

// Same workload once per interval in `ns`, plus once with images off.
MetricsReport bench_logging_overhead(const WorkloadSpec &spec, const std::vector<std::uint32_t> &ns,
                                     const BenchConfig &cfg, std::vector<OverheadTrial> *trials = nullptr);

struct LatencyTrial {
    std::int64_t age_micros = 0;
    Lsn split;
    std::uint64_t analysis_records = 0;
    std::uint64_t undo_records_read = 0;
    std::uint64_t pages_prepared = 0;
};

// One workload, then a snapshot per age with a fixed full-scan query.
MetricsReport bench_as_of_latency(const WorkloadSpec &spec, const std::vector<std::int64_t> &ages_micros,
                                  const BenchConfig &cfg, std::vector<LatencyTrial> *trials = nullptr);

// Backup half way, finish the workload, then compare restore-and-roll-
// forward with a snapshot point lookup.
MetricsReport bench_restore(const WorkloadSpec &spec, const BenchConfig &cfg);

} // namespace chronodb::bench
