#pragma once

#include "chronodb/data_file.hpp"
#include "chronodb/page.hpp"
#include "chronodb/wal.hpp"

#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

namespace chronodb {

struct CacheStats {
    std::uint64_t fetches = 0;
    std::uint64_t misses = 0; // fetches served by a data-file read
    std::uint64_t writes = 0;
    std::uint64_t evictions = 0;
};

// Fixed-capacity LRU page cache over the primary data file. Pinned frames
// are never evicted; a dirty victim is written only after the log is durable
// through its pageLSN.
class PageCache
{
    struct Frame {
        PageNo no = 0;
        Page page;
        bool dirty = false;
        int pins = 0;
        std::shared_mutex latch;
        std::list<PageNo>::iterator lru;
        bool in_lru = false;
    };

public:
    // Pinned handle to a cached page.
    class Ref
    {
    public:
        Ref() = default;
        Ref(const Ref &other);
        Ref(Ref &&other) noexcept;
        Ref &operator=(Ref other) noexcept;
        ~Ref();

        [[nodiscard]] Page &page() { return frame_->page; }
        [[nodiscard]] const Page &page() const { return frame_->page; }
        [[nodiscard]] PageNo no() const { return frame_->no; }
        [[nodiscard]] std::shared_mutex &latch() const { return frame_->latch; }
        void mark_dirty();
        explicit operator bool() const { return frame_ != nullptr; }

    private:
        friend class PageCache;
        Ref(PageCache *cache, Frame *frame) : cache_(cache), frame_(frame) {}
        void release();

        PageCache *cache_ = nullptr;
        Frame *frame_ = nullptr;
    };

    // Invoked before every data-file write with the page and the durable log
    // LSN at that moment.
    using WriteObserver = std::function<void(PageNo, const Page &, Lsn flushed)>;

    PageCache(DataFile &file, Wal &wal, std::size_t capacity);

    Ref fetch(PageNo no);

    // Writes every dirty page whose pageLSN <= lsn.
    void flush_up_to(Lsn lsn);
    void flush_all();
    // Writes dirty pages with pageLSN <= limit without touching the log
    // (crash simulation; the caller vouches that the log is durable).
    void write_durable(Lsn limit);
    // Drops every frame without writing (crash simulation).
    void discard_all();

    void set_write_observer(WriteObserver obs);
    [[nodiscard]] std::size_t dirty_count() const;
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] CacheStats stats() const;
    [[nodiscard]] std::size_t capacity() const { return capacity_; }

private:
    void unpin(Frame *frame);
    void write_frame(Frame &frame);
    void evict_one();

    DataFile &file_;
    Wal &wal_;
    std::size_t capacity_;
    mutable std::mutex mu_;
    std::unordered_map<PageNo, std::unique_ptr<Frame>> frames_;
    std::list<PageNo> lru_; // unpinned frames, least recent first
    WriteObserver observer_;
    CacheStats stats_;
};

using PageRef = PageCache::Ref;

} // namespace chronodb
