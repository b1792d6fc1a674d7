#include "chronodb/bench/restore.hpp"
#include "chronodb/error.hpp"
#include "chronodb/wal.hpp"

#include <chrono>
#include <fstream>
#include <vector>

namespace chronodb::bench {

namespace fs = std::filesystem;

namespace {

Lsn backup_lsn(const fs::path &backup)
{
    std::ifstream in(fs::path(backup).concat(".lsn"));
    std::uint64_t v = 0;
    if (!(in >> v)) {
        throw Error(Errc::InvalidArgument, "no checkpoint LSN recorded for backup " + backup.string());
    }
    return Lsn{v};
}

std::uint64_t segment_first(const fs::path &p)
{
    return std::stoull(p.stem().string());
}

} // namespace

RestoreResult restore_baseline(const fs::path &backup, const fs::path &source, const fs::path &target, Lsn to,
                               Options opts)
{
    const auto t0 = std::chrono::steady_clock::now();
    RestoreResult result;
    result.baseline = backup_lsn(backup);
    if (to < result.baseline) {
        throw Error(Errc::BaselineGap, "restore point " + std::to_string(to.value) + " precedes the backup at " +
                                           std::to_string(result.baseline.value));
    }
    std::vector<fs::path> segments;
    for (const auto &e : fs::directory_iterator(source / "wal")) {
        if (e.path().extension() == ".log") {
            segments.push_back(e.path());
        }
    }
    std::sort(segments.begin(), segments.end());
    if (segments.empty() || segment_first(segments.front()) > result.baseline.value) {
        throw Error(Errc::BaselineGap, "log does not reach back to the backup at LSN " +
                                           std::to_string(result.baseline.value));
    }

    fs::remove_all(target);
    fs::create_directories(target / "wal");
    {
        const auto page_size = DataFile::stored_page_size(backup);
        std::ifstream in(backup, std::ios::binary);
        std::ofstream out(target / "data.cdb", std::ios::binary | std::ios::trunc);
        std::vector<char> buf(page_size);
        while (in.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            ++result.pages_copied;
        }
        if (!out) {
            throw Error(Errc::Io, "cannot write restored data file");
        }
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        // Segments wholly before the backup are not needed.
        if (i + 1 < segments.size() && segment_first(segments[i + 1]) <= result.baseline.value) {
            continue;
        }
        if (segment_first(segments[i]) > to.value) {
            break;
        }
        fs::copy_file(segments[i], target / "wal" / segments[i].filename());
    }
    write_master(target / "master", MasterRecord{result.baseline, result.baseline}, false);
    opts.stop_after = to;
    result.db = Database::open(target, opts);
    result.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

} // namespace chronodb::bench
