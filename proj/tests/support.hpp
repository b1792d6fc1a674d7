#pragma once

#include "chronodb/bench/oracle.hpp"
#include "chronodb/database.hpp"

#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

namespace chronodb::test {

// Scratch directory removed on destruction.
class TempDir
{
public:
    explicit TempDir(const std::string &tag)
        : path_(std::filesystem::temp_directory_path() /
                ("chronodb-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++)))
    {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    [[nodiscard]] const std::filesystem::path &path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string &s) const { return path_ / s; }

private:
    static int &counter()
    {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

inline Options small_options(std::shared_ptr<ManualClock> clock, std::uint32_t n = 64)
{
    Options o;
    o.page_size = 1024;
    o.preformat_n = n;
    o.clock = std::move(clock);
    return o;
}

// Empty string when the snapshot matches the oracle at its split LSN, else
// a description of the first difference.
inline std::string diff_snapshot(const Snapshot &snap, const bench::Oracle &oracle)
{
    const auto expect = oracle.state_at(snap.split_lsn());
    std::ostringstream out;
    const auto catalog = snap.tables();
    if (catalog != expect.catalog) {
        out << "catalog differs at split " << snap.split_lsn() << ": " << catalog.size() << " tables vs "
            << expect.catalog.size();
        return out.str();
    }
    for (const auto &t : expect.catalog) {
        const auto rows = snap.scan(t.name);
        const auto &want = expect.tables.at(t.name);
        if (rows != want) {
            out << "table " << t.name << " differs at split " << snap.split_lsn() << ": " << rows.size()
                << " rows vs " << want.size();
            return out.str();
        }
    }
    return {};
}

// Primary contents against the oracle at `lsn`.
inline std::string diff_primary(Database &db, const bench::Oracle &oracle, Lsn lsn)
{
    const auto expect = oracle.state_at(lsn);
    std::ostringstream out;
    const auto catalog = db.tables();
    if (catalog != expect.catalog) {
        out << "catalog differs: " << catalog.size() << " tables vs " << expect.catalog.size();
        return out.str();
    }
    for (const auto &t : expect.catalog) {
        if (db.scan(t.name) != expect.tables.at(t.name)) {
            out << "table " << t.name << " differs";
            return out.str();
        }
    }
    return {};
}

} // namespace chronodb::test
