#pragma once

#include "chronodb/page.hpp"
#include "chronodb/wal.hpp"

namespace chronodb {

struct PrepareStats {
    std::uint64_t records_read = 0;
    std::uint64_t image_shortcuts = 0;
};

// Rewinds `page` (a current image) to its state as of `as_of` by walking the
// page's prevPageLSN chain and undoing each record above `as_of`. With
// `use_images`, the walk starts from the oldest full-page image logged above
// `as_of` when one exists, so at most one image plus the records between it
// and `as_of` are read.
void prepare_page_as_of(Page &page, Lsn as_of, const Wal &wal, bool use_images, PrepareStats &stats);

} // namespace chronodb
