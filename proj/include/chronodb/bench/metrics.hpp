#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace chronodb::bench {

struct MetricsRow {
    std::string label;
    std::string n; // periodic image interval or "off"
    std::uint64_t log_bytes = 0;
    double txn_throughput = 0;
    double snapshot_create_millis = 0;
    double as_of_query_millis = 0;
    std::uint64_t undo_records_read = 0;
    std::uint64_t pages_prepared = 0;
    double restore_baseline_millis = 0;
    std::uint64_t restore_pages_copied = 0;
    double timing_ratio = 0;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;

    [[nodiscard]] static const std::string &header();
    [[nodiscard]] std::string to_csv() const;
    void write_csv(const std::filesystem::path &path) const;
};

[[nodiscard]] std::string format_n(std::uint32_t n);

} // namespace chronodb::bench
