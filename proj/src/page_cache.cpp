#include "chronodb/page_cache.hpp"
#include "chronodb/error.hpp"

#include <algorithm>
#include <vector>

namespace chronodb {

PageCache::Ref::Ref(const Ref &other) : cache_(other.cache_), frame_(other.frame_)
{
    if (frame_ != nullptr) {
        std::lock_guard lock(cache_->mu_);
        ++frame_->pins;
    }
}

PageCache::Ref::Ref(Ref &&other) noexcept : cache_(other.cache_), frame_(other.frame_)
{
    other.cache_ = nullptr;
    other.frame_ = nullptr;
}

PageCache::Ref &PageCache::Ref::operator=(Ref other) noexcept
{
    std::swap(cache_, other.cache_);
    std::swap(frame_, other.frame_);
    return *this;
}

PageCache::Ref::~Ref() { release(); }

void PageCache::Ref::release()
{
    if (frame_ != nullptr) {
        cache_->unpin(frame_);
        frame_ = nullptr;
        cache_ = nullptr;
    }
}

void PageCache::Ref::mark_dirty()
{
    std::lock_guard lock(cache_->mu_);
    frame_->dirty = true;
}

PageCache::PageCache(DataFile &file, Wal &wal, std::size_t capacity)
    : file_(file), wal_(wal), capacity_(std::max<std::size_t>(capacity, 8))
{
}

PageCache::Ref PageCache::fetch(PageNo no)
{
    std::lock_guard lock(mu_);
    ++stats_.fetches;
    if (auto it = frames_.find(no); it != frames_.end()) {
        auto *f = it->second.get();
        if (f->in_lru) {
            lru_.erase(f->lru);
            f->in_lru = false;
        }
        ++f->pins;
        return Ref(this, f);
    }
    while (frames_.size() >= capacity_ && !lru_.empty()) {
        evict_one();
    }
    auto frame = std::make_unique<Frame>();
    frame->no = no;
    frame->page = Page(file_.page_size());
    file_.read(no, frame->page);
    ++stats_.misses;
    frame->pins = 1;
    auto *f = frame.get();
    frames_.emplace(no, std::move(frame));
    return Ref(this, f);
}

void PageCache::unpin(Frame *frame)
{
    std::lock_guard lock(mu_);
    if (--frame->pins == 0) {
        lru_.push_back(frame->no);
        frame->lru = std::prev(lru_.end());
        frame->in_lru = true;
    }
}

void PageCache::write_frame(Frame &frame)
{
    const Lsn lsn = frame.page.lsn();
    if (lsn > wal_.flushed_lsn()) {
        wal_.flush_up_to(lsn);
    }
    const Lsn flushed = wal_.flushed_lsn();
    if (lsn > flushed) {
        throw Error(Errc::WalRuleViolation, "page " + std::to_string(frame.no) + " has pageLSN " +
                                                std::to_string(lsn.value) + " beyond durable log " +
                                                std::to_string(flushed.value));
    }
    std::shared_lock latch(frame.latch);
    if (observer_) {
        observer_(frame.no, frame.page, flushed);
    }
    file_.write(frame.no, frame.page);
    frame.dirty = false;
    ++stats_.writes;
}

void PageCache::evict_one()
{
    const PageNo victim = lru_.front();
    lru_.pop_front();
    auto it = frames_.find(victim);
    it->second->in_lru = false;
    if (it->second->dirty) {
        write_frame(*it->second);
    }
    frames_.erase(it);
    ++stats_.evictions;
}

void PageCache::flush_up_to(Lsn lsn)
{
    std::lock_guard lock(mu_);
    std::vector<Frame *> dirty;
    Lsn max_lsn;
    for (auto &[no, f] : frames_) {
        if (f->dirty && f->page.lsn() <= lsn) {
            dirty.push_back(f.get());
            max_lsn = std::max(max_lsn, f->page.lsn());
        }
    }
    if (dirty.empty()) {
        return;
    }
    wal_.flush_up_to(max_lsn);
    std::sort(dirty.begin(), dirty.end(), [](const Frame *a, const Frame *b) { return a->no < b->no; });
    for (auto *f : dirty) {
        write_frame(*f);
    }
    file_.sync();
}

void PageCache::flush_all()
{
    flush_up_to(Lsn{~std::uint64_t{0}});
}

void PageCache::write_durable(Lsn limit)
{
    std::lock_guard lock(mu_);
    for (auto &[no, f] : frames_) {
        if (f->dirty && f->page.lsn() <= limit) {
            std::shared_lock latch(f->latch);
            file_.write(no, f->page);
            f->dirty = false;
            ++stats_.writes;
        }
    }
    file_.sync();
}

void PageCache::discard_all()
{
    std::lock_guard lock(mu_);
    std::erase_if(frames_, [](const auto &kv) { return kv.second->pins == 0; });
    for (auto &[no, f] : frames_) {
        f->dirty = false;
    }
    lru_.clear();
    for (auto &[no, f] : frames_) {
        f->in_lru = false;
    }
}

void PageCache::set_write_observer(WriteObserver obs)
{
    std::lock_guard lock(mu_);
    observer_ = std::move(obs);
}

std::size_t PageCache::dirty_count() const
{
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(frames_.begin(), frames_.end(), [](const auto &kv) { return kv.second->dirty; }));
}

std::size_t PageCache::size() const
{
    std::lock_guard lock(mu_);
    return frames_.size();
}

CacheStats PageCache::stats() const
{
    std::lock_guard lock(mu_);
    return stats_;
}

} // namespace chronodb
