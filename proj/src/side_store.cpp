#include "chronodb/side_store.hpp"
#include "chronodb/coding.hpp"
#include "chronodb/error.hpp"

#include <fcntl.h>
#include <fstream>
#include <unistd.h>

namespace chronodb {

namespace {
constexpr std::size_t kRecordHeader = 8;
constexpr std::uint8_t kUndoApplied = 1;
} // namespace

SideStore::SideStore(std::filesystem::path path, std::size_t page_size, bool sync)
    : path_(std::move(path)), page_size_(page_size), sync_(sync)
{
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) {
        throw_errno("open " + path_.string());
    }
    replay();
}

SideStore::~SideStore()
{
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

void SideStore::replay()
{
    std::ifstream in(path_, std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto *p = reinterpret_cast<const std::uint8_t *>(buf.data());
    std::size_t off = 0;
    while (off + kRecordHeader <= buf.size()) {
        const auto len = get_u32(p + off);
        if (len != 5 + page_size_ || off + kRecordHeader + len > buf.size()) {
            break;
        }
        const auto body = std::string_view(buf).substr(off + kRecordHeader, len);
        if (crc32(body) != get_u32(p + off + 4)) {
            break; // torn append
        }
        const auto *b = p + off + kRecordHeader;
        Entry e{Page(page_size_), (b[4] & kUndoApplied) != 0};
        std::copy(b + 5, b + 5 + page_size_, e.page.data());
        entries_[get_u32(b)] = std::move(e);
        off += kRecordHeader + len;
    }
    end_ = off;
    if (off != buf.size() && ::ftruncate(fd_, static_cast<off_t>(off)) != 0) {
        throw_errno("truncate side store");
    }
}

std::optional<SideStore::Entry> SideStore::get(PageNo no) const
{
    std::lock_guard lock(mu_);
    if (auto it = entries_.find(no); it != entries_.end()) {
        return it->second;
    }
    return std::nullopt;
}

bool SideStore::contains(PageNo no) const
{
    std::lock_guard lock(mu_);
    return entries_.count(no) != 0;
}

void SideStore::put(PageNo no, const Page &page, bool undo_applied)
{
    std::string rec(kRecordHeader + 5, '\0');
    auto *p = reinterpret_cast<std::uint8_t *>(rec.data());
    put_u32(p, static_cast<std::uint32_t>(5 + page_size_));
    put_u32(p + kRecordHeader, no);
    p[kRecordHeader + 4] = undo_applied ? kUndoApplied : 0;
    rec.append(reinterpret_cast<const char *>(page.data()), page.size());
    put_u32(reinterpret_cast<std::uint8_t *>(rec.data()) + 4, crc32(std::string_view(rec).substr(kRecordHeader)));

    std::lock_guard lock(mu_);
    if (fd_ < 0) {
        throw Error(Errc::SnapshotDropped, "side store removed");
    }
    std::size_t done = 0;
    while (done < rec.size()) {
        const auto n = ::pwrite(fd_, rec.data() + done, rec.size() - done, static_cast<off_t>(end_ + done));
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno("side store write");
        }
        done += static_cast<std::size_t>(n);
    }
    if (sync_ && ::fdatasync(fd_) != 0) {
        throw_errno("side store sync");
    }
    end_ += rec.size();
    entries_[no] = Entry{page, undo_applied};
}

void SideStore::reset()
{
    std::lock_guard lock(mu_);
    entries_.clear();
    end_ = 0;
    if (fd_ >= 0 && ::ftruncate(fd_, 0) != 0) {
        throw_errno("truncate side store");
    }
}

void SideStore::remove()
{
    std::lock_guard lock(mu_);
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    entries_.clear();
    std::error_code ec;
    std::filesystem::remove(path_, ec);
}

std::size_t SideStore::size() const
{
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::uint64_t SideStore::file_bytes() const
{
    std::lock_guard lock(mu_);
    return end_;
}

} // namespace chronodb
