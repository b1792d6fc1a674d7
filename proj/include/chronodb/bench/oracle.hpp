#pragma once

#include "chronodb/bench/workload.hpp"
#include "chronodb/database.hpp"

#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace chronodb::bench {

// Forward-replay oracle. Logical state comes from replaying the committed
// trace; page images and per-page counters come from the engine's apply
// hook during forward processing. Nothing here reads the log backwards.
class Oracle
{
public:
    struct State {
        std::vector<TableInfo> catalog; // name order
        std::map<std::string, std::vector<Row>> tables;
    };

    // Installs the apply observer on `db` and notes current mutation counts.
    void attach(Database &db);
    void add(const WorkloadResult &result);
    void add(const CommittedTxn &txn);

    [[nodiscard]] State state_at(Lsn split) const;

    // Page image right after the last record on `no` at or below `lsn`;
    // nullopt when the page was not touched by then.
    [[nodiscard]] std::optional<Page> page_at(PageNo no, Lsn lsn) const;
    // Records applied to `no` with LSN in (lo, hi].
    [[nodiscard]] std::uint64_t records_between(PageNo no, Lsn lo, Lsn hi) const;
    // Mutations of `no` in (lo, hi] (full images excluded).
    [[nodiscard]] std::uint64_t mutations_between(PageNo no, Lsn lo, Lsn hi) const;
    // Log records a rewind of `no` from `page_lsn` to `as_of` must read.
    [[nodiscard]] std::uint64_t expected_rewind_reads(PageNo no, Lsn as_of, Lsn page_lsn, bool images) const;

    [[nodiscard]] std::uint64_t mutations(PageNo no) const;
    [[nodiscard]] std::uint64_t periodic_images() const { return periodic_images_; }
    // Sum over pages of floor(mutations / n).
    [[nodiscard]] std::uint64_t expected_periodic_images(std::uint32_t n) const;
    [[nodiscard]] std::vector<PageNo> pages() const;

private:
    struct Capture {
        Lsn lsn;
        bool mutation = false;
        bool image = false;
        std::shared_ptr<const Page> page;
    };

    std::map<PageNo, std::vector<Capture>> captures_;
    std::map<PageNo, std::uint64_t> base_mutations_; // counts before attach
    std::uint64_t periodic_images_ = 0;
    std::vector<CommittedTxn> committed_;
};

} // namespace chronodb::bench
