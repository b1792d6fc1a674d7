#pragma once

#include "chronodb/log_record.hpp"
#include "chronodb/page.hpp"
#include "chronodb/page_cache.hpp"

#include <memory>

namespace chronodb {

// Read handle: either a pinned cache frame or an owned page image.
class PageView
{
public:
    explicit PageView(PageRef ref) : ref_(std::move(ref)), page_(&ref_.page()) {}
    explicit PageView(std::shared_ptr<const Page> page) : owned_(std::move(page)), page_(owned_.get()) {}

    [[nodiscard]] const Page &operator*() const { return *page_; }
    [[nodiscard]] const Page *operator->() const { return page_; }

private:
    PageRef ref_;
    std::shared_ptr<const Page> owned_;
    const Page *page_;
};

// Page access for the access methods. The primary implementation logs every
// action and applies it through the cache; the snapshot implementation
// applies actions to side-store images without logging.
class PageIo
{
public:
    virtual ~PageIo() = default;

    [[nodiscard]] virtual std::size_t page_size() const = 0;
    virtual PageView read(PageNo no) = 0;
    virtual void apply(PageNo no, const PageAction &action) = 0;
    // Allocates and formats a page. Called inside begin_smo/end_smo.
    virtual PageNo allocate(PageType type) = 0;
    virtual void begin_smo() = 0;
    virtual void end_smo() = 0;
    // The next non-structural apply compensates `undone`.
    virtual void set_compensation(Lsn undone, Lsn undo_next) = 0;
};

// Allocation-map page covering page `no`.
[[nodiscard]] inline PageNo map_page_for(PageNo no, std::size_t page_size)
{
    const auto cap = static_cast<PageNo>(Page::map_capacity(page_size));
    return (no / cap) * cap + 1;
}

// Pages at or above this number exist only in a snapshot side store (pages
// created by splits during snapshot undo).
inline constexpr PageNo kFirstVirtualPage = 0x4000'0000;

inline constexpr PageNo kCatalogRoot = 2;

} // namespace chronodb
