#include "chronodb/prepare.hpp"
#include "chronodb/error.hpp"
#include "chronodb/page_ops.hpp"

#include <cstring>

namespace chronodb {

namespace {

void install(Page &page, const LogRecord &pre)
{
    const auto &image = std::get<PreformatPage>(pre.body).image;
    if (image.size() != page.size()) {
        throw Error(Errc::UndoMismatch, "image size mismatch at LSN " + std::to_string(pre.lsn.value));
    }
    std::memcpy(page.data(), image.data(), image.size());
}

} // namespace

void prepare_page_as_of(Page &page, Lsn as_of, const Wal &wal, bool use_images, PrepareStats &stats)
{
    if (page.lsn() <= as_of) {
        return;
    }
    const PageNo no = page.page_no();
    if (use_images) {
        if (const auto image = wal.first_image_after(no, as_of, page.lsn())) {
            const auto rec = wal.read(*image);
            ++stats.records_read;
            ++stats.image_shortcuts;
            install(page, rec);
        }
    }
    while (page.lsn() > as_of) {
        const auto rec = wal.read(page.lsn());
        ++stats.records_read;
        if (rec.page != no) {
            throw Error(Errc::UndoMismatch, "record " + std::to_string(rec.lsn.value) + " is for page " +
                                                std::to_string(rec.page) + ", not " + std::to_string(no));
        }
        const auto *fmt = std::get_if<FormatPage>(&rec.body);
        if (fmt != nullptr && fmt->prior == FormatPrior::FromPreformat) {
            // Reallocation: the preceding record holds the prior incarnation.
            const auto pre = wal.read(rec.prev_page_lsn);
            ++stats.records_read;
            if (!std::holds_alternative<PreformatPage>(pre.body) || pre.page != no) {
                throw Error(Errc::UndoMismatch, "format at LSN " + std::to_string(rec.lsn.value) +
                                                    " lacks its preformat image");
            }
            install(page, pre);
            if (pre.lsn <= as_of) {
                page.set_lsn(pre.lsn);
            }
            continue;
        }
        undo_record(page, rec);
    }
}

} // namespace chronodb
