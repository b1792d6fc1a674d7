#include "chronodb/page_ops.hpp"
#include "chronodb/error.hpp"

#include <cstring>

namespace chronodb {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void mismatch(const Page &page, const std::string &what)
{
    throw Error(Errc::UndoMismatch, what + " on page " + std::to_string(page.page_no()) + " at LSN " +
                                        std::to_string(page.lsn().value));
}

std::size_t map_index(const Page &page, PageNo target)
{
    return target % Page::map_capacity(page.size());
}

void install_image(Page &page, const std::string &image)
{
    if (image.size() != page.size()) {
        mismatch(page, "preformat image size");
    }
    std::memcpy(page.data(), image.data(), image.size());
}

} // namespace

void apply_action(Page &page, const PageAction &action)
{
    std::visit(overloaded{
                   [&](const FormatPage &a) {
                       page.format(a.type);
                       if (a.type == PageType::AllocMap) {
                           page.map_set(map_index(page, page.page_no()), true, true);
                           if (page.page_no() == 1) {
                               page.map_set(0, true, true); // file header page
                           }
                       }
                   },
                   [&](const PreformatPage &a) { install_image(page, a.image); },
                   [&](const InsertRow &a) {
                       if (a.slot > page.slot_count()) {
                           mismatch(page, "insert slot out of range");
                       }
                       page.insert_row(a.slot, a.row);
                   },
                   [&](const DeleteRow &a) {
                       if (a.slot >= page.slot_count() || page.row(a.slot) != a.row) {
                           mismatch(page, "delete row mismatch");
                       }
                       page.erase_row(a.slot);
                   },
                   [&](const UpdateRow &a) {
                       if (a.slot >= page.slot_count() || page.row(a.slot) != a.before) {
                           mismatch(page, "update before-image mismatch");
                       }
                       page.replace_row(a.slot, a.after);
                   },
                   [&](const AllocPage &a) {
                       const auto idx = map_index(page, a.target);
                       if (page.map_allocated(idx)) {
                           mismatch(page, "allocating allocated page " + std::to_string(a.target));
                       }
                       page.map_set(idx, true, page.map_ever_allocated(idx) || a.first_ever);
                   },
                   [&](const DeallocPage &a) {
                       const auto idx = map_index(page, a.target);
                       if (!page.map_allocated(idx)) {
                           mismatch(page, "deallocating free page " + std::to_string(a.target));
                       }
                       page.map_set(idx, false, page.map_ever_allocated(idx));
                   },
               },
               action);
}

void revert_action(Page &page, const PageAction &action)
{
    std::visit(overloaded{
                   [&](const FormatPage &a) {
                       switch (a.prior) {
                       case FormatPrior::Zero: page.clear(); break;
                       case FormatPrior::Empty: page.format(a.prior_type); break;
                       case FormatPrior::FromPreformat:
                           mismatch(page, "format over a reallocated page needs its preformat image");
                       }
                   },
                   [&](const PreformatPage &) { mismatch(page, "preformat has no inverse action"); },
                   [&](const InsertRow &a) {
                       if (a.slot >= page.slot_count() || page.row(a.slot) != a.row) {
                           mismatch(page, "undo insert: row mismatch");
                       }
                       page.erase_row(a.slot);
                   },
                   [&](const DeleteRow &a) {
                       if (a.slot > page.slot_count()) {
                           mismatch(page, "undo delete: slot out of range");
                       }
                       page.insert_row(a.slot, a.row);
                   },
                   [&](const UpdateRow &a) {
                       if (a.slot >= page.slot_count() || page.row(a.slot) != a.after) {
                           mismatch(page, "undo update: after-image mismatch");
                       }
                       page.replace_row(a.slot, a.before);
                   },
                   [&](const AllocPage &a) {
                       const auto idx = map_index(page, a.target);
                       if (!page.map_allocated(idx) || !page.map_ever_allocated(idx)) {
                           mismatch(page, "undo alloc: page " + std::to_string(a.target) + " not allocated");
                       }
                       page.map_set(idx, false, !a.first_ever);
                   },
                   [&](const DeallocPage &a) {
                       const auto idx = map_index(page, a.target);
                       if (page.map_allocated(idx)) {
                           mismatch(page, "undo dealloc: page " + std::to_string(a.target) + " allocated");
                       }
                       page.map_set(idx, true, page.map_ever_allocated(idx));
                   },
               },
               action);
}

void redo_record(Page &page, const LogRecord &rec)
{
    if (!rec.has_page()) {
        throw Error(Errc::CorruptRecord, "redo of a record without a page");
    }
    if (const auto *pre = std::get_if<PreformatPage>(&rec.body)) {
        install_image(page, pre->image);
        page.set_lsn(rec.lsn);
        return;
    }
    page.set_page_no(rec.page);
    if (const auto *clr = std::get_if<Compensation>(&rec.body)) {
        apply_action(page, clr->action);
    } else {
        std::visit(overloaded{
                       [&](const Compensation &) {},
                       [&](const TxnBegin &) {},
                       [&](const TxnCommit &) {},
                       [&](const TxnAbortEnd &) {},
                       [&](const CheckpointBegin &) {},
                       [&](const CheckpointEnd &) {},
                       [&](const auto &action) { apply_action(page, PageAction{action}); },
                   },
                   rec.body);
    }
    page.set_mutation_count(page.mutation_count() + 1);
    page.set_lsn(rec.lsn);
}

void undo_record(Page &page, const LogRecord &rec)
{
    if (page.lsn() != rec.lsn) {
        mismatch(page, "undo of LSN " + std::to_string(rec.lsn.value));
    }
    if (const auto *pre = std::get_if<PreformatPage>(&rec.body)) {
        install_image(page, pre->image);
        if (page.lsn() != rec.prev_page_lsn) {
            mismatch(page, "preformat image LSN does not match its chain link");
        }
        return;
    }
    if (const auto *fmt = std::get_if<FormatPage>(&rec.body); fmt && fmt->prior == FormatPrior::Zero) {
        page.clear();
        return;
    }
    if (const auto *clr = std::get_if<Compensation>(&rec.body)) {
        revert_action(page, clr->action);
    } else {
        std::visit(overloaded{
                       [&](const Compensation &) {},
                       [&](const TxnBegin &) {},
                       [&](const TxnCommit &) {},
                       [&](const TxnAbortEnd &) {},
                       [&](const CheckpointBegin &) {},
                       [&](const CheckpointEnd &) {},
                       [&](const auto &action) { revert_action(page, PageAction{action}); },
                   },
                   rec.body);
    }
    page.set_mutation_count(page.mutation_count() - 1);
    page.set_lsn(rec.prev_page_lsn);
}

} // namespace chronodb
