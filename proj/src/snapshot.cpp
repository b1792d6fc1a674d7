#include "chronodb/error.hpp"
#include "chronodb/page_ops.hpp"
#include "chronodb/prepare.hpp"
#include "engine.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

namespace chronodb {

namespace fs = std::filesystem;
using detail::SnapshotCore;
using detail::SnapshotIo;

// ---------------------------------------------------------------------------
// SplitLSN resolution

Lsn Database::Impl::resolve_split(std::int64_t wall)
{
    // Narrow with checkpoint stamps, then scan commits forward.
    Lsn from = wal->first_lsn();
    for (const auto &cp : wal->checkpoints()) {
        if (cp.wall_micros <= wall && cp.begin >= from) {
            from = cp.begin;
        }
    }
    const Lsn last = wal->last_lsn();
    std::optional<Lsn> at_or_before;
    std::optional<Lsn> after;
    if (!last.is_nil() && from <= last) {
        wal->scan(from, last, [&](const LogRecord &rec) {
            if (const auto *c = std::get_if<TxnCommit>(&rec.body)) {
                if (c->wall_micros <= wall) {
                    at_or_before = rec.lsn;
                } else {
                    after = rec.lsn;
                    return false;
                }
            }
            return true;
        });
    }
    if (at_or_before) {
        return *at_or_before;
    }
    if (after) {
        return after->prev();
    }
    return wal->flushed_lsn();
}

std::optional<CheckpointInfo> Database::Impl::analysis_checkpoint(Lsn split)
{
    std::optional<CheckpointInfo> best;
    for (const auto &cp : wal->checkpoints()) {
        if (cp.end <= split) {
            best = cp;
        }
    }
    return best;
}

namespace {

// Moves a split that falls inside an atomic record group to just before it.
Lsn clamp_to_group(const Wal &wal, Lsn split)
{
    while (!split.is_nil() && split >= wal.first_lsn()) {
        const auto rec = wal.read(split);
        if ((rec.flags & kFlagInGroup) == 0 || (rec.flags & kFlagGroupEnd) != 0) {
            break;
        }
        // Inside an open-ended group: step to its first member's predecessor.
        Lsn l = split;
        for (;;) {
            const Lsn p = l.prev();
            if (p.is_nil() || p < wal.first_lsn()) {
                return p;
            }
            const auto prev = wal.read(p);
            if ((prev.flags & kFlagInGroup) == 0 || (prev.flags & kFlagGroupEnd) != 0) {
                return p;
            }
            l = p;
        }
    }
    return split;
}

std::filesystem::path meta_path_for(const fs::path &dir, std::uint64_t id)
{
    return dir / "snapshots" / (std::to_string(id) + ".meta");
}

std::filesystem::path side_path_for(const fs::path &dir, std::uint64_t id)
{
    return dir / "snapshots" / (std::to_string(id) + ".side");
}

} // namespace

std::shared_ptr<SnapshotCore> Database::Impl::create_snapshot(const AsOf &as_of)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto core = std::make_shared<SnapshotCore>();
    {
        std::unique_lock op(op_mu);
        check_open();
        const auto now = clock->now_micros();
        Lsn split;
        if (as_of.wall_micros) {
            const auto wall = *as_of.wall_micros;
            if (wall > now) {
                throw Error(Errc::FutureTime, "as-of time " + format_timestamp(wall) + " is in the future");
            }
            if (wall < now - opts.undo_interval_micros) {
                throw Error(Errc::RetentionExceeded,
                            "as-of time " + format_timestamp(wall) + " is older than the undo interval");
            }
            split = resolve_split(wall);
        } else if (as_of.lsn) {
            split = *as_of.lsn;
            if (split > wal->flushed_lsn()) {
                wal->flush_all();
            }
            if (split > wal->flushed_lsn()) {
                throw Error(Errc::FutureTime, "LSN " + std::to_string(split.value) + " is beyond the log");
            }
        } else {
            throw Error(Errc::InvalidArgument, "as-of needs a time or an LSN");
        }
        if (split < wal->first_lsn().prev()) {
            throw Error(Errc::RetentionExceeded, "LSN " + std::to_string(split.value) + " was truncated");
        }
        split = clamp_to_group(*wal, split);

        Lsn start;
        if (const auto cp = analysis_checkpoint(split)) {
            start = cp->begin;
        } else if (wal->first_lsn() == Lsn{1}) {
            start = Lsn{1};
        } else {
            throw Error(Errc::RetentionExceeded, "no checkpoint at or before LSN " + std::to_string(split.value));
        }
        if (start < wal->first_lsn()) {
            throw Error(Errc::RetentionExceeded, "log needed for LSN " + std::to_string(split.value) + " was truncated");
        }

        core->engine = this;
        core->split = split;
        core->analysis_start = start;
        core->pin = start;
        core->as_of_wall = as_of.wall_micros;
        {
            std::lock_guard lock(snap_mu);
            core->id = next_snapshot_id++;
            snapshots[core->id] = core;
        }
        core->meta_path = meta_path_for(dir, core->id);
        core->side = std::make_unique<SideStore>(side_path_for(dir, core->id), file->page_size(), opts.sync);
        checkpoint_locked();
    }
    try {
        core->recover();
        core->persist_meta();
        core->state = SnapshotState::Online;
        core->start_undo();
    } catch (...) {
        drop_snapshot(core->id);
        throw;
    }
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::lock_guard lock(core->metrics_mu);
    core->metrics.create_millis = ms;
    return core;
}

void Database::Impl::drop_snapshot(std::uint64_t id)
{
    std::shared_ptr<SnapshotCore> core;
    {
        std::lock_guard lock(snap_mu);
        auto it = snapshots.find(id);
        if (it == snapshots.end()) {
            return;
        }
        core = it->second;
        snapshots.erase(it);
    }
    core->shutdown();
    core->remove_files();
}

void Database::Impl::load_snapshots()
{
    std::vector<fs::path> metas;
    for (const auto &entry : fs::directory_iterator(dir / "snapshots")) {
        if (entry.path().extension() == ".meta") {
            metas.push_back(entry.path());
        }
    }
    std::sort(metas.begin(), metas.end());
    for (const auto &path : metas) {
        nlohmann::json j;
        try {
            std::ifstream in(path);
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception &) {
            // Metadata never completed: the snapshot was not yet created.
            fs::remove(path);
            continue;
        }
        auto core = std::make_shared<SnapshotCore>();
        core->engine = this;
        core->id = j.at("id").get<std::uint64_t>();
        core->split = Lsn{j.at("split").get<std::uint64_t>()};
        core->analysis_start = Lsn{j.at("analysis_start").get<std::uint64_t>()};
        core->pin = core->analysis_start;
        if (j.contains("as_of_wall")) {
            core->as_of_wall = j.at("as_of_wall").get<std::int64_t>();
        }
        core->meta_path = path;
        core->side = std::make_unique<SideStore>(side_path_for(dir, core->id), file->page_size(), opts.sync);
        if (core->analysis_start < wal->first_lsn()) {
            core->side->remove();
            fs::remove(path);
            continue;
        }
        {
            std::lock_guard lock(snap_mu);
            snapshots[core->id] = core;
            next_snapshot_id = std::max(next_snapshot_id, core->id + 1);
        }
        if (j.value("undo_complete", false)) {
            core->next_virtual = j.value("next_virtual", kFirstVirtualPage);
            core->undo_done = true;
            core->state = SnapshotState::Online;
        } else {
            // Undo was interrupted; its partial effects are discarded.
            core->side->reset();
            core->recover();
            core->state = SnapshotState::Online;
            core->start_undo();
        }
    }
}

// ---------------------------------------------------------------------------
// SnapshotCore

namespace detail {

void SnapshotCore::check_alive() const
{
    if (state.load() == SnapshotState::Dropped) {
        throw Error(Errc::SnapshotDropped, "snapshot " + std::to_string(id) + " was dropped");
    }
}

Page SnapshotCore::read(PageNo no)
{
    check_alive();
    if (no == 0) {
        throw Error(Errc::PageOutOfRange, "page 0 is the file header");
    }
    if (auto hit = side->get(no)) {
        std::lock_guard lock(metrics_mu);
        ++metrics.side_hits;
        return std::move(hit->page);
    }
    if (no >= kFirstVirtualPage) {
        throw Error(Errc::PageOutOfRange, "virtual page " + std::to_string(no) + " missing from the side store");
    }
    std::lock_guard prep(prep_mu);
    if (auto hit = side->get(no)) {
        std::lock_guard lock(metrics_mu);
        ++metrics.side_hits;
        return std::move(hit->page);
    }
    Page page = engine->copy_primary_page(no);
    if (page.is_zero()) {
        page.set_page_no(no);
    }
    PrepareStats ps;
    const bool rewind = page.lsn() > split;
    if (rewind) {
        prepare_page_as_of(page, split, *engine->wal, engine->opts.preformat_n != 0, ps);
        side->put(no, page, false);
    }
    std::lock_guard lock(metrics_mu);
    if (page_reads.try_emplace(no, ps.records_read).second) {
        ++metrics.pages_prepared;
    }
    if (rewind) {
        ++metrics.pages_rewound;
    }
    metrics.undo_records_read += ps.records_read;
    metrics.preformat_shortcuts += ps.image_shortcuts;
    return page;
}

Page SnapshotCore::get_or_put(PageNo no, const std::function<Page()> &producer)
{
    check_alive();
    std::lock_guard prep(prep_mu);
    if (auto hit = side->get(no)) {
        return std::move(hit->page);
    }
    Page page = producer();
    side->put(no, page, false);
    return page;
}

void SnapshotCore::recover()
{
    const auto &wal = *engine->wal;
    const auto reads_before = engine->file->reads();
    std::map<TxnId, ActiveEntry> txns;
    std::uint64_t scanned = 0;
    if (!split.is_nil() && analysis_start <= split) {
        wal.scan(analysis_start, split, [&](const LogRecord &rec) {
            ++scanned;
            if (const auto *end = std::get_if<CheckpointEnd>(&rec.body)) {
                for (const auto &a : end->active) {
                    txns.try_emplace(a.txn, ActiveEntry{a.first_lsn, a.last_lsn});
                }
            }
            if (rec.txn != 0) {
                auto &e = txns[rec.txn];
                if (e.first.is_nil()) {
                    e.first = rec.lsn;
                }
                e.last = rec.lsn;
                if (std::holds_alternative<TxnCommit>(rec.body) || std::holds_alternative<TxnAbortEnd>(rec.body)) {
                    txns.erase(rec.txn);
                }
            }
            return true;
        });
    }
    // Redo needs no page access: pages are rewound from the current primary
    // image on first read.
    losers.clear();
    for (const auto &[txn, e] : txns) {
        losers.push_back(ActiveTxn{txn, e.first, e.last});
    }
    std::sort(losers.begin(), losers.end(), [](const auto &a, const auto &b) { return a.last_lsn > b.last_lsn; });

    // Lock pass: every key a loser touched stays blocked until its undo.
    std::uint64_t lock_reads = 0;
    for (const auto &l : losers) {
        Lsn lsn = l.last_lsn;
        while (!lsn.is_nil()) {
            const auto rec = wal.read(lsn);
            ++lock_reads;
            if (std::holds_alternative<TxnBegin>(rec.body)) {
                break;
            }
            if (const auto *c = std::get_if<Compensation>(&rec.body)) {
                lsn = c->undo_next;
                continue;
            }
            if (needs_logical_undo(rec)) {
                if (const auto *a = std::get_if<InsertRow>(&rec.body)) {
                    locks.acquire(l.txn, LockKey{a->root, std::string(row_key(a->row))});
                } else if (const auto *d = std::get_if<DeleteRow>(&rec.body)) {
                    locks.acquire(l.txn, LockKey{d->root, std::string(row_key(d->row))});
                } else if (const auto *u = std::get_if<UpdateRow>(&rec.body)) {
                    locks.acquire(l.txn, LockKey{u->root, std::string(row_key(u->before))});
                }
            }
            lsn = rec.prev_lsn;
        }
    }

    std::lock_guard lock(metrics_mu);
    metrics.analysis_records = scanned;
    metrics.lock_records_read = lock_reads;
    metrics.redo_page_reads = engine->file->reads() - reads_before;
    metrics.losers = losers.size();
}

void SnapshotCore::start_undo()
{
    {
        std::lock_guard lock(undo_mu);
        undo_done = false;
        undo_error = nullptr;
    }
    worker = std::thread([this] { run_undo(); });
}

void SnapshotCore::run_undo()
{
    try {
        SnapshotIo io(*this);
        const auto &wal = *engine->wal;
        std::uint64_t actions = 0;
        for (const auto &l : losers) {
            Lsn lsn = l.last_lsn;
            while (!lsn.is_nil() && !stop.load()) {
                const auto rec = wal.read(lsn);
                if (std::holds_alternative<TxnBegin>(rec.body)) {
                    break;
                }
                if (const auto *c = std::get_if<Compensation>(&rec.body)) {
                    lsn = c->undo_next;
                    continue;
                }
                if (needs_logical_undo(rec)) {
                    std::unique_lock tree(tree_mu);
                    logical_undo(io, rec);
                    ++actions;
                }
                lsn = rec.prev_lsn;
            }
            if (stop.load()) {
                return;
            }
            locks.release_all(l.txn);
        }
        {
            std::lock_guard lock(metrics_mu);
            metrics.undo_actions = actions;
        }
        {
            std::lock_guard lock(undo_mu);
            undo_done = true;
        }
        persist_meta();
    } catch (...) {
        std::lock_guard lock(undo_mu);
        undo_error = std::current_exception();
        undo_done = true;
    }
    undo_cv.notify_all();
}

void SnapshotCore::persist_meta() const
{
    nlohmann::json j;
    j["id"] = id;
    j["split"] = split.value;
    j["analysis_start"] = analysis_start.value;
    if (as_of_wall) {
        j["as_of_wall"] = *as_of_wall;
    }
    {
        std::lock_guard lock(undo_mu);
        j["undo_complete"] = undo_done && !undo_error;
    }
    j["next_virtual"] = next_virtual;
    const auto tmp = fs::path(meta_path).concat(".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << j.dump(2) << "\n";
        if (!out) {
            throw Error(Errc::Io, "cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, meta_path);
}

void SnapshotCore::shutdown()
{
    if (state.exchange(SnapshotState::Dropped) == SnapshotState::Dropped && !worker.joinable()) {
        return;
    }
    stop = true;
    locks.close();
    if (worker.joinable()) {
        worker.join();
    }
    {
        std::lock_guard lock(undo_mu);
        undo_done = true;
    }
    undo_cv.notify_all();
}

void SnapshotCore::remove_files()
{
    side->remove();
    std::error_code ec;
    fs::remove(meta_path, ec);
}

PageView SnapshotIo::read(PageNo no) { return PageView(std::make_shared<const Page>(core_.read(no))); }

void SnapshotIo::apply(PageNo no, const PageAction &action)
{
    Page page = core_.read(no);
    apply_action(page, action);
    core_.side->put(no, page, true);
}

PageNo SnapshotIo::allocate(PageType type)
{
    const PageNo no = core_.next_virtual++;
    Page page(page_size());
    page.set_page_no(no);
    apply_action(page, FormatPage{type, FormatPrior::Zero, PageType::Free});
    core_.side->put(no, page, true);
    return no;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Snapshot

namespace {

std::optional<TableInfo> snapshot_table(SnapshotCore &core, const std::string &name)
{
    core.check_alive();
    core.locks.wait_free(LockKey{kCatalogRoot, name});
    std::shared_lock tree(core.tree_mu);
    SnapshotIo io(core);
    const auto value = btree::lookup(io, kCatalogRoot, name);
    if (!value) {
        return std::nullopt;
    }
    return detail::decode_catalog_row(name, *value);
}

TableInfo require_table(SnapshotCore &core, const std::string &name)
{
    auto info = snapshot_table(core, name);
    if (!info) {
        throw Error(Errc::NoSuchTable, "no table " + name + " as of LSN " + std::to_string(core.split.value));
    }
    return *info;
}

} // namespace

std::uint64_t Snapshot::id() const { return core_->id; }
Lsn Snapshot::split_lsn() const { return core_->split; }
Lsn Snapshot::analysis_start() const { return core_->analysis_start; }
SnapshotState Snapshot::state() const { return core_->state.load(); }

std::vector<TableInfo> Snapshot::tables() const
{
    core_->check_alive();
    core_->locks.wait_range(kCatalogRoot, std::nullopt, std::nullopt);
    std::shared_lock tree(core_->tree_mu);
    SnapshotIo io(*core_);
    std::vector<TableInfo> out;
    btree::scan(io, kCatalogRoot, std::nullopt, std::nullopt, [&](std::string_view k, std::string_view v) {
        out.push_back(detail::decode_catalog_row(k, v));
        return true;
    });
    return out;
}

std::optional<TableInfo> Snapshot::table(const std::string &name) const { return snapshot_table(*core_, name); }

std::optional<std::string> Snapshot::get(const std::string &table, std::string_view key) const
{
    const auto info = require_table(*core_, table);
    core_->locks.wait_free(LockKey{info.root, std::string(key)});
    std::shared_lock tree(core_->tree_mu);
    SnapshotIo io(*core_);
    return btree::lookup(io, info.root, key);
}

std::vector<Row> Snapshot::scan(const std::string &table, const std::optional<std::string> &lo,
                                const std::optional<std::string> &hi) const
{
    const auto info = require_table(*core_, table);
    core_->locks.wait_range(info.root, lo, hi);
    std::shared_lock tree(core_->tree_mu);
    SnapshotIo io(*core_);
    std::vector<Row> out;
    btree::scan(io, info.root, lo, hi, [&](std::string_view k, std::string_view v) {
        out.push_back(Row{std::string(k), std::string(v)});
        return true;
    });
    return out;
}

Page Snapshot::read_page(PageNo no) const { return core_->read(no); }

Page Snapshot::get_or_put(PageNo no, const std::function<Page()> &producer) const
{
    return core_->get_or_put(no, producer);
}

void Snapshot::wait_for_undo() const
{
    std::unique_lock lock(core_->undo_mu);
    core_->undo_cv.wait(lock, [&] { return core_->undo_done; });
    if (core_->undo_error) {
        std::rethrow_exception(core_->undo_error);
    }
    if (core_->state.load() == SnapshotState::Dropped) {
        throw Error(Errc::SnapshotDropped, "snapshot " + std::to_string(core_->id) + " was dropped");
    }
}

bool Snapshot::undo_complete() const
{
    std::lock_guard lock(core_->undo_mu);
    return core_->undo_done && !core_->undo_error;
}

SnapshotMetrics Snapshot::metrics() const
{
    std::lock_guard lock(core_->metrics_mu);
    return core_->metrics;
}

std::map<PageNo, std::uint64_t> Snapshot::page_undo_reads() const
{
    std::lock_guard lock(core_->metrics_mu);
    return core_->page_reads;
}

std::size_t Snapshot::side_store_pages() const { return core_->side->size(); }
fs::path Snapshot::side_store_path() const { return core_->side->path(); }

// ---------------------------------------------------------------------------
// Database entry points

Lsn Database::resolve_split_lsn(std::int64_t wall_micros)
{
    impl_->check_open();
    std::shared_lock op(impl_->op_mu);
    return impl_->resolve_split(wall_micros);
}

std::shared_ptr<Snapshot> Database::create_snapshot(const AsOf &as_of)
{
    return std::make_shared<Snapshot>(impl_->create_snapshot(as_of));
}

std::shared_ptr<Snapshot> Database::snapshot(std::uint64_t id)
{
    std::lock_guard lock(impl_->snap_mu);
    auto it = impl_->snapshots.find(id);
    if (it == impl_->snapshots.end()) {
        return nullptr;
    }
    return std::make_shared<Snapshot>(it->second);
}

std::vector<std::shared_ptr<Snapshot>> Database::snapshots()
{
    std::lock_guard lock(impl_->snap_mu);
    std::vector<std::shared_ptr<Snapshot>> out;
    for (const auto &[id, core] : impl_->snapshots) {
        out.push_back(std::make_shared<Snapshot>(core));
    }
    return out;
}

void Database::drop_snapshot(std::uint64_t id) { impl_->drop_snapshot(id); }

} // namespace chronodb
