#include "chronodb/error.hpp"
#include "chronodb/page_ops.hpp"
#include "engine.hpp"

#include <algorithm>

namespace chronodb {

using detail::TxnState;

namespace detail {

bool needs_logical_undo(const LogRecord &rec)
{
    if (rec.txn == 0 || rec.is_smo()) {
        return false;
    }
    return std::holds_alternative<InsertRow>(rec.body) || std::holds_alternative<DeleteRow>(rec.body) ||
           std::holds_alternative<UpdateRow>(rec.body) || std::holds_alternative<AllocPage>(rec.body) ||
           std::holds_alternative<DeallocPage>(rec.body);
}

void logical_undo(PageIo &io, const LogRecord &rec)
{
    if (const auto *a = std::get_if<InsertRow>(&rec.body)) {
        io.set_compensation(rec.lsn, rec.prev_lsn);
        btree::erase(io, a->root, row_key(a->row));
    } else if (const auto *d = std::get_if<DeleteRow>(&rec.body)) {
        io.set_compensation(rec.lsn, rec.prev_lsn);
        btree::insert(io, d->root, row_key(d->row), row_value(d->row));
    } else if (const auto *u = std::get_if<UpdateRow>(&rec.body)) {
        io.set_compensation(rec.lsn, rec.prev_lsn);
        btree::update(io, u->root, row_key(u->before), row_value(u->before));
    } else if (const auto *al = std::get_if<AllocPage>(&rec.body)) {
        // Table creation: release every page the tree grew to. Pages already
        // released by an interrupted earlier attempt are skipped.
        const auto cap = Page::map_capacity(io.page_size());
        std::vector<PageNo> todo;
        for (const auto p : btree::pages(io, al->target)) {
            if (p >= kFirstVirtualPage) {
                continue;
            }
            const auto map = map_page_for(p, io.page_size());
            if (io.read(map)->map_allocated(p % cap)) {
                todo.push_back(p);
            }
        }
        for (std::size_t i = 0; i < todo.size(); ++i) {
            const bool last = i + 1 == todo.size();
            io.set_compensation(rec.lsn, last ? rec.prev_lsn : rec.lsn);
            io.apply(map_page_for(todo[i], io.page_size()), DeallocPage{todo[i]});
        }
    } else if (const auto *dl = std::get_if<DeallocPage>(&rec.body)) {
        const PageType type = io.read(dl->target)->type();
        io.set_compensation(rec.lsn, rec.prev_lsn);
        io.apply(rec.page, AllocPage{dl->target, type, false});
    }
}

} // namespace detail

void Database::Impl::rollback(TxnState &txn, PrimaryIo &io)
{
    Lsn lsn = txn.last_lsn;
    while (!lsn.is_nil()) {
        const LogRecord rec = wal->read(lsn);
        if (recovering) {
            bump([](EngineStats &s) { ++s.recovery_undo_records; });
        }
        if (std::holds_alternative<TxnBegin>(rec.body)) {
            break;
        }
        if (const auto *c = std::get_if<Compensation>(&rec.body)) {
            lsn = c->undo_next;
            continue;
        }
        if (detail::needs_logical_undo(rec)) {
            detail::logical_undo(io, rec);
        }
        lsn = rec.prev_lsn;
    }
    io.log_txn_record(TxnAbortEnd{});
}

void Database::Impl::recover()
{
    recovering = true;
    const auto master = read_master(dir / "master");
    Lsn start = wal->first_lsn();
    if (master && !master->checkpoint.is_nil() && master->checkpoint >= wal->first_lsn()) {
        start = master->checkpoint;
    }
    bump([&](EngineStats &s) { s.recovery_analysis_start = start; });

    std::map<TxnId, detail::ActiveEntry> txns;
    TxnId next_id = std::max<TxnId>(next_txn.load(), wal->max_txn_seen() + 1);
    PageNo count = std::max<PageNo>(page_count.load(), kCatalogRoot + 1);
    std::uint64_t redone = 0;

    if (!wal->last_lsn().is_nil() && start <= wal->last_lsn()) {
        wal->scan(start, wal->last_lsn(), [&](const LogRecord &rec) {
            if (const auto *end = std::get_if<CheckpointEnd>(&rec.body)) {
                next_id = std::max(next_id, end->next_txn_id);
                for (const auto &a : end->active) {
                    txns.try_emplace(a.txn, detail::ActiveEntry{a.first_lsn, a.last_lsn});
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
            if (rec.has_page()) {
                if (rec.page >= count) {
                    count = rec.page + 1;
                    page_count = count;
                }
                auto ref = cache->fetch(rec.page);
                if (rec.lsn > ref.page().lsn()) {
                    redo_record(ref.page(), rec);
                    ref.mark_dirty();
                    ++redone;
                }
            }
            return true;
        });
    }
    page_count = count;
    next_txn = next_id;
    bump([&](EngineStats &s) { s.recovery_redo_records += redone; });

    if (cache->fetch(kCatalogRoot).page().type() != PageType::Catalog) {
        // Crashed before the database was first made durable.
        recovering = false;
        bootstrap();
        return;
    }

    // Pages freed by losers come back during undo, so splits in undo take
    // fresh pages only.
    {
        std::lock_guard lock(free_mu);
        free_pages.clear();
    }
    next_fresh = page_count.load();
    active = txns;
    std::vector<std::pair<TxnId, detail::ActiveEntry>> losers(txns.begin(), txns.end());
    std::sort(losers.begin(), losers.end(),
              [](const auto &a, const auto &b) { return a.second.last > b.second.last; });
    for (const auto &[id, e] : losers) {
        TxnState t;
        t.id = id;
        t.begun = true;
        t.first_lsn = e.first;
        t.last_lsn = e.last;
        {
            PrimaryIo io(*this, &t);
            rollback(t, io);
        }
        active.erase(id);
    }
    rebuild_free_pages();
    recovering = false;
    checkpoint_locked();
}

} // namespace chronodb
