#include "chronodb/database.hpp"
#include "chronodb/coding.hpp"
#include "chronodb/error.hpp"
#include "chronodb/page_ops.hpp"
#include "engine.hpp"

#include <algorithm>
#include <fstream>

namespace chronodb {

namespace fs = std::filesystem;
using detail::TxnPhase;
using detail::TxnState;

namespace detail {

std::string encode_catalog_value(PageNo root, Lsn created)
{
    std::string out;
    Encoder enc(out);
    enc.u32(root);
    enc.u64(created.value);
    return out;
}

TableInfo decode_catalog_row(std::string_view key, std::string_view value)
{
    Decoder dec(value);
    TableInfo info;
    info.name = std::string(key);
    info.root = dec.u32();
    info.created = Lsn{dec.u64()};
    return info;
}

} // namespace detail

// ---------------------------------------------------------------------------
// PrimaryIo

PrimaryIo::~PrimaryIo()
{
    if (group_depth_ > 0 && !e_.crashed) {
        e_.wal->end_group();
    }
}

PageView PrimaryIo::read(PageNo no)
{
    if (no == 0 || no >= e_.page_count.load()) {
        throw Error(Errc::PageOutOfRange, "page " + std::to_string(no) + " outside the data file (" +
                                              std::to_string(e_.page_count.load()) + " pages)");
    }
    return PageView(e_.cache->fetch(no));
}

void PrimaryIo::ensure_begun()
{
    if (txn_ != nullptr && !txn_->begun) {
        txn_->begun = true;
        LogRecord rec;
        rec.body = TxnBegin{};
        append(rec);
    }
}

Lsn PrimaryIo::append(LogRecord &rec)
{
    if (txn_ != nullptr) {
        rec.txn = txn_->id;
        rec.prev_lsn = txn_->last_lsn;
    }
    const Lsn lsn = e_.wal->append(rec);
    last_lsn_ = lsn;
    if (txn_ != nullptr) {
        txn_->last_lsn = lsn;
        if (txn_->first_lsn.is_nil()) {
            txn_->first_lsn = lsn;
        }
        auto &entry = e_.active[txn_->id];
        if (entry.first.is_nil()) {
            entry.first = lsn;
        }
        entry.last = lsn;
    }
    return lsn;
}

Lsn PrimaryIo::log_txn_record(RecordBody body)
{
    ensure_begun();
    LogRecord rec;
    rec.body = std::move(body);
    return append(rec);
}

void PrimaryIo::apply(PageNo no, const PageAction &action)
{
    ensure_begun();
    auto ref = e_.cache->fetch(no);
    LogRecord rec;
    rec.page = no;
    rec.prev_page_lsn = ref.page().lsn();
    rec.flags = smo_ ? kFlagSmo : 0;
    if (compensation_ && !smo_) {
        rec.body = Compensation{compensation_->first, compensation_->second, action};
        compensation_.reset();
    } else {
        rec.body = to_body(action);
    }
    append(rec);
    {
        std::unique_lock latch(ref.latch());
        redo_record(ref.page(), rec);
    }
    ref.mark_dirty();
    if (e_.observer) {
        e_.observer(rec, ref.page());
    }

    if (txn_ != nullptr) {
        if (const auto *d = std::get_if<DeallocPage>(&action)) {
            txn_->pending_free.insert(d->target);
        } else if (const auto *a = std::get_if<AllocPage>(&action)) {
            txn_->pending_free.erase(a->target);
        }
    }

    const auto n = e_.opts.preformat_n;
    if (n != 0 && is_page_mutation(rec) && ref.page().mutation_count() % n == 0) {
        LogRecord img;
        img.page = no;
        img.prev_page_lsn = ref.page().lsn();
        img.body = PreformatPage{PreformatReason::Periodic,
                                 std::string(reinterpret_cast<const char *>(ref.page().data()), ref.page().size())};
        e_.wal->append(img);
        {
            std::unique_lock latch(ref.latch());
            redo_record(ref.page(), img);
        }
        if (e_.observer) {
            e_.observer(img, ref.page());
        }
        e_.bump([](EngineStats &s) { ++s.periodic_images; });
    }
    if (group_depth_ > 0) {
        group_pins_.push_back(std::move(ref));
    }
}

void PrimaryIo::begin_group()
{
    if (group_depth_++ == 0) {
        e_.wal->begin_group();
    }
}

void PrimaryIo::end_group()
{
    if (--group_depth_ == 0) {
        e_.wal->end_group();
        group_pins_.clear();
        smo_ = false;
    }
}

void PrimaryIo::begin_smo()
{
    ensure_begun();
    begin_group();
    smo_ = true;
    e_.bump([](EngineStats &s) { ++s.splits; });
}

void PrimaryIo::end_smo() { end_group(); }

void PrimaryIo::set_compensation(Lsn undone, Lsn undo_next) { compensation_ = std::make_pair(undone, undo_next); }

// ---------------------------------------------------------------------------
// Engine

Database::Impl::Impl(const fs::path &d, Options o)
    : dir(d), opts(std::move(o)), locks(opts.lock_timeout)
{
    clock = opts.clock ? opts.clock : std::make_shared<SystemClock>();
    fs::create_directories(dir / "snapshots");
    const bool exists = fs::exists(dir / "data.cdb");
    const auto page_size = exists ? DataFile::stored_page_size(dir / "data.cdb") : opts.page_size;
    opts.page_size = page_size;

    WalOptions wo;
    wo.dir = dir / "wal";
    wo.segment_bytes = opts.segment_bytes;
    wo.sync = opts.sync;
    wo.max_log_bytes = opts.max_log_bytes;
    wo.stop_after = opts.stop_after;
    wo.crash_at = opts.crash_at;
    wal = std::make_unique<Wal>(wo, *clock);
    file = std::make_unique<DataFile>(dir / "data.cdb", page_size, opts.sync);
    cache = std::make_unique<PageCache>(*file, *wal, opts.cache_pages);
    page_count = file->page_count();
}

void Database::Impl::check_open() const
{
    if (closed || crashed) {
        throw Error(Errc::EngineClosed, "database is closed");
    }
}

void Database::Impl::bootstrap()
{
    // Allocation map for the first page group and the catalog root.
    page_count = kCatalogRoot + 1;
    PrimaryIo io(*this, nullptr);
    io.begin_group();
    io.apply(1, FormatPage{PageType::AllocMap, FormatPrior::Zero, PageType::Free});
    io.apply(1, AllocPage{kCatalogRoot, PageType::Catalog, true});
    io.apply(kCatalogRoot, FormatPage{PageType::Catalog, FormatPrior::Zero, PageType::Free});
    io.end_group();
    next_fresh = kCatalogRoot + 1;
    checkpoint_locked();
}

PageNo Database::Impl::allocate_page(PrimaryIo &io, PageType type)
{
    const auto cap = static_cast<PageNo>(Page::map_capacity(file->page_size()));
    PageNo target = kNilPage;
    {
        std::lock_guard lock(free_mu);
        if (!free_pages.empty()) {
            target = *free_pages.begin();
            free_pages.erase(free_pages.begin());
        }
    }
    if (target == kNilPage) {
        target = next_fresh;
        for (;;) {
            const PageNo map = (target / cap) * cap + 1;
            if (target == map) {
                ++target;
                continue;
            }
            if (map >= page_count.load()) {
                if (map == kNilPage || map + 1 == 0) {
                    throw Error(Errc::OutOfSpace, "page numbers exhausted");
                }
                page_count = map + 1;
                io.apply(map, FormatPage{PageType::AllocMap, FormatPrior::Zero, PageType::Free});
            }
            break;
        }
        if (target >= kFirstVirtualPage) {
            throw Error(Errc::OutOfSpace, "data file is full");
        }
        next_fresh = target + 1;
    }
    page_count = std::max(page_count.load(), target + 1);

    const PageNo map = map_page_for(target, file->page_size());
    const bool ever = io.read(map)->map_ever_allocated(target % cap);
    io.apply(map, AllocPage{target, type, !ever});
    last_alloc_lsn = io.last_lsn();
    if (!ever) {
        io.apply(target, FormatPage{type, FormatPrior::Zero, PageType::Free});
        bump([](EngineStats &s) { ++s.first_allocations; });
    } else {
        std::string image;
        PageType old_type;
        {
            const auto v = io.read(target);
            image.assign(reinterpret_cast<const char *>(v->data()), v->size());
            old_type = v->type();
        }
        io.apply(target, PreformatPage{PreformatReason::Realloc, std::move(image)});
        io.apply(target, FormatPage{type, FormatPrior::FromPreformat, old_type});
        bump([](EngineStats &s) { ++s.reallocations; });
    }
    return target;
}

void Database::Impl::rebuild_free_pages()
{
    const auto cap = static_cast<PageNo>(Page::map_capacity(file->page_size()));
    std::set<PageNo> free;
    const PageNo count = page_count.load();
    for (PageNo map = 1; map < count; map += cap) {
        auto ref = cache->fetch(map);
        const auto &p = ref.page();
        if (p.type() != PageType::AllocMap) {
            continue;
        }
        const PageNo base = map - 1;
        for (PageNo i = 0; i < cap && base + i < count; ++i) {
            const PageNo no = base + i;
            if (no == map || no == 0) {
                continue;
            }
            if (!p.map_allocated(i)) {
                free.insert(no);
            }
        }
    }
    std::lock_guard lock(free_mu);
    free_pages = std::move(free);
    next_fresh = count;
}

Lsn Database::Impl::checkpoint_locked()
{
    LogRecord begin;
    begin.body = CheckpointBegin{};
    const Lsn begin_lsn = wal->append(begin);
    wal->flush_all();
    cache->flush_all();
    file->set_page_count(page_count.load());
    file->sync();

    CheckpointEnd end;
    end.begin = begin_lsn;
    end.next_txn_id = next_txn.load();
    for (const auto &[id, e] : active) {
        end.active.push_back(ActiveTxn{id, e.first, e.last});
    }
    LogRecord end_rec;
    end_rec.body = std::move(end);
    wal->append(end_rec);
    wal->flush_all();
    last_checkpoint = begin_lsn;
    write_master(dir / "master", MasterRecord{begin_lsn, wal->first_lsn()}, opts.sync);
    bump([](EngineStats &s) { ++s.checkpoints; });
    return begin_lsn;
}

std::optional<TableInfo> Database::Impl::lookup_table(PageIo &io, const std::string &name)
{
    const auto value = btree::lookup(io, kCatalogRoot, name);
    if (!value) {
        return std::nullopt;
    }
    return detail::decode_catalog_row(name, *value);
}

void Database::Impl::finish_txn(TxnState &txn, TxnPhase phase)
{
    locks.release_all(txn.id);
    {
        std::lock_guard lock(free_mu);
        free_pages.insert(txn.pending_free.begin(), txn.pending_free.end());
    }
    txn.pending_free.clear();
    txn.phase = phase;
}

Page Database::Impl::copy_primary_page(PageNo no)
{
    Page copy(file->page_size());
    {
        std::shared_lock op(op_mu);
        check_open();
        if (no == 0 || no >= page_count.load()) {
            return copy;
        }
        auto ref = cache->fetch(no);
        std::shared_lock latch(ref.latch());
        copy = ref.page();
    }
    if (copy.lsn() > wal->flushed_lsn()) {
        wal->flush_up_to(copy.lsn());
    }
    return copy;
}

Lsn Database::Impl::truncate_horizon()
{
    const auto now = clock->now_micros();
    Lsn horizon = wal->first_lsn();
    // Keep everything a snapshot at (now - interval) would need.
    const auto window_wall = now - opts.undo_interval_micros;
    const auto cps = wal->checkpoints();
    if (!cps.empty() && cps.front().wall_micros <= window_wall) {
        const Lsn split = resolve_split(window_wall);
        if (const auto cp = analysis_checkpoint(split)) {
            horizon = cp->begin;
        }
    }
    {
        std::lock_guard lock(snap_mu);
        for (const auto &[id, s] : snapshots) {
            horizon = std::min(horizon, s->pin);
        }
    }
    for (const auto &[id, e] : active) {
        horizon = std::min(horizon, e.first);
    }
    if (!last_checkpoint.is_nil()) {
        horizon = std::min(horizon, last_checkpoint);
    }
    return horizon;
}

// ---------------------------------------------------------------------------
// Database

Database::Database(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

std::unique_ptr<Database> Database::open(const fs::path &dir, Options opts)
{
    const bool exists = fs::exists(dir / "data.cdb");
    auto impl = std::make_unique<Impl>(dir, std::move(opts));
    {
        std::unique_lock op(impl->op_mu);
        if (exists) {
            impl->recover();
        } else {
            impl->bootstrap();
        }
    }
    impl->load_snapshots();
    return std::unique_ptr<Database>(new Database(std::move(impl)));
}

Database::~Database()
{
    if (!impl_) {
        return;
    }
    std::vector<std::shared_ptr<detail::SnapshotCore>> snaps;
    {
        std::lock_guard lock(impl_->snap_mu);
        for (auto &[id, s] : impl_->snapshots) {
            snaps.push_back(s);
        }
    }
    for (auto &s : snaps) {
        s->shutdown();
    }
    if (!impl_->crashed) {
        try {
            std::unique_lock op(impl_->op_mu);
            impl_->checkpoint_locked();
        } catch (...) {
        }
    }
    impl_->closed = true;
}

TxnId Txn::id() const { return state_ ? state_->id : 0; }
bool Txn::active() const { return state_ && state_->phase == TxnPhase::Active; }
Lsn Txn::last_lsn() const { return state_ ? state_->last_lsn : Lsn{}; }

Txn Database::begin()
{
    impl_->check_open();
    auto s = std::make_shared<TxnState>();
    s->id = impl_->next_txn.fetch_add(1);
    return Txn(std::move(s));
}

namespace {
TxnState &active_state(Txn &txn, const std::shared_ptr<TxnState> &s)
{
    (void)txn;
    if (!s || s->phase != TxnPhase::Active) {
        throw Error(Errc::InvalidArgument, "transaction is not active");
    }
    return *s;
}
} // namespace

void Database::commit(Txn &txn)
{
    auto &t = active_state(txn, txn.state_);
    impl_->check_open();
    Lsn commit_lsn;
    {
        std::unique_lock op(impl_->op_mu);
        if (t.begun) {
            PrimaryIo io(*impl_, &t);
            commit_lsn = io.log_txn_record(TxnCommit{});
        }
        impl_->active.erase(t.id);
    }
    if (!commit_lsn.is_nil()) {
        impl_->wal->flush_up_to(commit_lsn);
    }
    impl_->finish_txn(t, TxnPhase::Committed);
    impl_->bump([](EngineStats &s) { ++s.commits; });
}

void Database::abort(Txn &txn)
{
    auto &t = active_state(txn, txn.state_);
    impl_->check_open();
    {
        std::unique_lock op(impl_->op_mu);
        if (t.begun) {
            PrimaryIo io(*impl_, &t);
            impl_->rollback(t, io);
        }
        impl_->active.erase(t.id);
    }
    impl_->finish_txn(t, TxnPhase::Aborted);
    impl_->bump([](EngineStats &s) { ++s.aborts; });
}

TableInfo Database::create_table(Txn &txn, const std::string &name)
{
    auto &t = active_state(txn, txn.state_);
    impl_->check_open();
    if (name.empty() || name.size() + 14 > btree::max_row_size(page_size())) {
        throw Error(Errc::InvalidArgument, "bad table name");
    }
    impl_->locks.acquire(t.id, LockKey{kCatalogRoot, name});
    std::unique_lock op(impl_->op_mu);
    PrimaryIo io(*impl_, &t);
    if (impl_->lookup_table(io, name)) {
        throw Error(Errc::DuplicateTable, "table " + name + " exists");
    }
    io.begin_group();
    const PageNo root = impl_->allocate_page(io, PageType::BtreeLeaf);
    io.end_group();
    const Lsn created = impl_->last_alloc_lsn;
    btree::insert(io, kCatalogRoot, name, detail::encode_catalog_value(root, created));
    return TableInfo{name, root, created};
}

void Database::drop_table(Txn &txn, const std::string &name)
{
    auto &t = active_state(txn, txn.state_);
    impl_->check_open();
    impl_->locks.acquire(t.id, LockKey{kCatalogRoot, name});
    std::unique_lock op(impl_->op_mu);
    PrimaryIo io(*impl_, &t);
    const auto info = impl_->lookup_table(io, name);
    if (!info) {
        throw Error(Errc::NoSuchTable, "no table " + name);
    }
    btree::erase(io, kCatalogRoot, name);
    const auto pages = btree::pages(io, info->root);
    for (const auto p : pages) {
        io.apply(map_page_for(p, page_size()), DeallocPage{p});
    }
    impl_->bump([](EngineStats &s) { ++s.table_drops; });
}

namespace {

template <class Fn>
void row_op(Database::Impl &e, TxnState &t, const std::string &table, std::string_view key, Fn fn)
{
    e.check_open();
    PageNo root;
    {
        std::shared_lock op(e.op_mu);
        PrimaryIo io(e, nullptr);
        const auto info = e.lookup_table(io, table);
        if (!info) {
            throw Error(Errc::NoSuchTable, "no table " + table);
        }
        root = info->root;
    }
    e.locks.acquire(t.id, LockKey{root, std::string(key)});
    std::unique_lock op(e.op_mu);
    e.check_open();
    PrimaryIo io(e, &t);
    const auto info = e.lookup_table(io, table);
    if (!info || info->root != root) {
        throw Error(Errc::NoSuchTable, "no table " + table);
    }
    fn(io, root);
}

} // namespace

void Database::insert(Txn &txn, const std::string &table, std::string_view key, std::string_view value)
{
    auto &t = active_state(txn, txn.state_);
    row_op(*impl_, t, table, key, [&](PageIo &io, PageNo root) { btree::insert(io, root, key, value); });
}

void Database::update(Txn &txn, const std::string &table, std::string_view key, std::string_view value)
{
    auto &t = active_state(txn, txn.state_);
    row_op(*impl_, t, table, key, [&](PageIo &io, PageNo root) { btree::update(io, root, key, value); });
}

void Database::erase(Txn &txn, const std::string &table, std::string_view key)
{
    auto &t = active_state(txn, txn.state_);
    row_op(*impl_, t, table, key, [&](PageIo &io, PageNo root) { btree::erase(io, root, key); });
}

std::vector<TableInfo> Database::tables()
{
    impl_->check_open();
    std::shared_lock op(impl_->op_mu);
    PrimaryIo io(*impl_, nullptr);
    std::vector<TableInfo> out;
    btree::scan(io, kCatalogRoot, std::nullopt, std::nullopt, [&](std::string_view k, std::string_view v) {
        out.push_back(detail::decode_catalog_row(k, v));
        return true;
    });
    return out;
}

std::optional<TableInfo> Database::table(const std::string &name)
{
    impl_->check_open();
    std::shared_lock op(impl_->op_mu);
    PrimaryIo io(*impl_, nullptr);
    return impl_->lookup_table(io, name);
}

std::optional<std::string> Database::get(const std::string &table, std::string_view key)
{
    impl_->check_open();
    std::shared_lock op(impl_->op_mu);
    PrimaryIo io(*impl_, nullptr);
    const auto info = impl_->lookup_table(io, table);
    if (!info) {
        throw Error(Errc::NoSuchTable, "no table " + table);
    }
    return btree::lookup(io, info->root, key);
}

std::vector<Row> Database::scan(const std::string &table, const std::optional<std::string> &lo,
                                const std::optional<std::string> &hi)
{
    impl_->check_open();
    std::shared_lock op(impl_->op_mu);
    PrimaryIo io(*impl_, nullptr);
    const auto info = impl_->lookup_table(io, table);
    if (!info) {
        throw Error(Errc::NoSuchTable, "no table " + table);
    }
    std::vector<Row> out;
    btree::scan(io, info->root, lo, hi, [&](std::string_view k, std::string_view v) {
        out.push_back(Row{std::string(k), std::string(v)});
        return true;
    });
    return out;
}

Lsn Database::checkpoint()
{
    impl_->check_open();
    std::unique_lock op(impl_->op_mu);
    return impl_->checkpoint_locked();
}

Lsn Database::retention_horizon()
{
    impl_->check_open();
    std::shared_lock op(impl_->op_mu);
    return impl_->truncate_horizon();
}

Lsn Database::truncate_log()
{
    impl_->check_open();
    std::unique_lock op(impl_->op_mu);
    const Lsn horizon = impl_->truncate_horizon();
    impl_->wal->truncate_before(horizon);
    write_master(impl_->dir / "master", MasterRecord{impl_->last_checkpoint, impl_->wal->first_lsn()},
                 impl_->opts.sync);
    return horizon;
}

Lsn Database::backup(const fs::path &path)
{
    impl_->check_open();
    std::unique_lock op(impl_->op_mu);
    const Lsn cp = impl_->checkpoint_locked();
    fs::copy_file(impl_->dir / "data.cdb", path, fs::copy_options::overwrite_existing);
    std::ofstream meta(fs::path(path).concat(".lsn"));
    meta << cp.value << "\n";
    return cp;
}

Page Database::read_page(PageNo no)
{
    impl_->check_open();
    std::shared_lock op(impl_->op_mu);
    if (no == 0 || no >= impl_->page_count.load()) {
        throw Error(Errc::PageOutOfRange, "page " + std::to_string(no) + " outside the data file");
    }
    auto ref = impl_->cache->fetch(no);
    std::shared_lock latch(ref.latch());
    return ref.page();
}

void Database::flush_pages_up_to(Lsn lsn)
{
    impl_->check_open();
    std::unique_lock op(impl_->op_mu);
    impl_->cache->flush_up_to(lsn);
}

void Database::crash(bool flush_durable_pages)
{
    std::vector<std::shared_ptr<detail::SnapshotCore>> snaps;
    {
        std::lock_guard lock(impl_->snap_mu);
        for (auto &[id, s] : impl_->snapshots) {
            snaps.push_back(s);
        }
    }
    for (auto &s : snaps) {
        s->shutdown();
    }
    impl_->wal->crash(impl_->wal->flushed_lsn());
    if (flush_durable_pages) {
        impl_->cache->write_durable(impl_->wal->durable_stable_lsn());
    }
    impl_->cache->discard_all();
    impl_->crashed = true;
}

void Database::set_apply_observer(ApplyObserver obs)
{
    std::unique_lock op(impl_->op_mu);
    impl_->observer = std::move(obs);
}

std::size_t Database::page_size() const { return impl_->file->page_size(); }
PageNo Database::page_count() const { return impl_->page_count.load(); }
Lsn Database::last_lsn() const { return impl_->wal->last_lsn(); }
const Options &Database::options() const { return impl_->opts; }
Clock &Database::clock() const { return *impl_->clock; }
Wal &Database::wal() { return *impl_->wal; }
PageCache &Database::cache() { return *impl_->cache; }
DataFile &Database::data_file() { return *impl_->file; }
const fs::path &Database::dir() const { return impl_->dir; }

EngineStats Database::stats() const
{
    std::lock_guard lock(impl_->stats_mu);
    return impl_->stats;
}

std::uint64_t Database::expected_periodic_images()
{
    const auto n = impl_->opts.preformat_n;
    if (n == 0) {
        return 0;
    }
    std::shared_lock op(impl_->op_mu);
    std::uint64_t total = 0;
    for (PageNo no = 1; no < impl_->page_count.load(); ++no) {
        auto ref = impl_->cache->fetch(no);
        total += ref.page().mutation_count() / n;
    }
    return total;
}

} // namespace chronodb
