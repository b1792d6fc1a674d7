#pragma once

#include "chronodb/page.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <unordered_map>

namespace chronodb {

// Durable per-snapshot page overlay. The file is a sequence of
// [u32 length][u32 CRC][u32 page_no][u8 flags][page image] records;
// replay on open keeps the latest image of each page.
class SideStore
{
public:
    struct Entry {
        Page page;
        bool undo_applied = false;
    };

    SideStore(std::filesystem::path path, std::size_t page_size, bool sync);
    ~SideStore();

    SideStore(const SideStore &) = delete;
    SideStore &operator=(const SideStore &) = delete;

    [[nodiscard]] std::optional<Entry> get(PageNo no) const;
    [[nodiscard]] bool contains(PageNo no) const;
    void put(PageNo no, const Page &page, bool undo_applied);
    // Empties the store (file truncated).
    void reset();
    // Closes and deletes the backing file.
    void remove();

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::uint64_t file_bytes() const;
    [[nodiscard]] const std::filesystem::path &path() const { return path_; }

private:
    void replay();

    std::filesystem::path path_;
    std::size_t page_size_;
    bool sync_;
    int fd_ = -1;
    std::uint64_t end_ = 0;
    mutable std::mutex mu_;
    std::unordered_map<PageNo, Entry> entries_;
};

} // namespace chronodb
