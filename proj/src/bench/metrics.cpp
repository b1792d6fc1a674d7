#include "chronodb/bench/metrics.hpp"
#include "chronodb/error.hpp"

#include <fstream>
#include <sstream>

namespace chronodb::bench {

const std::string &MetricsReport::header()
{
    static const std::string h = "label,N,logBytes,txnThroughput,snapshotCreateMillis,asOfQueryMillis,"
                                 "undoRecordsRead,pagesPrepared,restoreBaselineMillis,restorePagesCopied,"
                                 "timingRatio";
    return h;
}

std::string MetricsReport::to_csv() const
{
    std::ostringstream out;
    out << header() << "\n";
    out.setf(std::ios::fixed);
    out.precision(3);
    for (const auto &r : rows) {
        out << r.label << ',' << r.n << ',' << r.log_bytes << ',' << r.txn_throughput << ','
            << r.snapshot_create_millis << ',' << r.as_of_query_millis << ',' << r.undo_records_read << ','
            << r.pages_prepared << ',' << r.restore_baseline_millis << ',' << r.restore_pages_copied << ','
            << r.timing_ratio << "\n";
    }
    return out.str();
}

void MetricsReport::write_csv(const std::filesystem::path &path) const
{
    std::ofstream out(path, std::ios::trunc);
    out << to_csv();
    if (!out) {
        throw Error(Errc::Io, "cannot write " + path.string());
    }
}

std::string format_n(std::uint32_t n) { return n == 0 ? "off" : std::to_string(n); }

} // namespace chronodb::bench
