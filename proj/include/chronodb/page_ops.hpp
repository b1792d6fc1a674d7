#pragma once

#include "chronodb/log_record.hpp"
#include "chronodb/page.hpp"

namespace chronodb {

// Content-only forward application of a page action.
void apply_action(Page &page, const PageAction &action);

// Inverse of apply_action. Verifies the page holds what the action produced
// and throws UndoMismatch otherwise. Not defined for Preformat or for a
// Format whose prior image lives in another record.
void revert_action(Page &page, const PageAction &action);

// Redo a page record: content, page number, mutation count and pageLSN.
void redo_record(Page &page, const LogRecord &rec);

// Page-oriented undo of one record: restores the exact image the page had
// before `rec` was applied, including pageLSN = rec.prev_page_lsn. The page's
// current LSN must equal rec.lsn.
void undo_record(Page &page, const LogRecord &rec);

} // namespace chronodb
