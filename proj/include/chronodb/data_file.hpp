#pragma once

#include "chronodb/page.hpp"

#include <atomic>
#include <filesystem>
#include <optional>
#include <mutex>

namespace chronodb {

// The primary data file: page 0 is a file header (magic, version, page size,
// page count); page n lives at offset n * page_size. On disk every written
// page carries a CRC-32 of bytes [4, page_size); an all-zero page is a valid
// never-written page.
class DataFile
{
public:
    // Opens `path`, creating it with `page_size` when absent. For an
    // existing file the stored page size wins.
    DataFile(std::filesystem::path path, std::size_t page_size, bool sync);
    ~DataFile();

    DataFile(const DataFile &) = delete;
    DataFile &operator=(const DataFile &) = delete;

    [[nodiscard]] std::size_t page_size() const { return page_size_; }
    [[nodiscard]] PageNo page_count() const { return page_count_.load(); }
    void set_page_count(PageNo n);

    // Reads one page; pages past the end of the file read as zero.
    void read(PageNo no, Page &out) const;
    void write(PageNo no, const Page &page);
    void sync();

    [[nodiscard]] std::uint64_t reads() const { return reads_.load(); }
    [[nodiscard]] std::uint64_t writes() const { return writes_.load(); }
    [[nodiscard]] const std::filesystem::path &path() const { return path_; }

    // Reads the page size recorded in an existing file header.
    [[nodiscard]] static std::size_t stored_page_size(const std::filesystem::path &path);

private:
    void write_header();

    std::filesystem::path path_;
    int fd_ = -1;
    std::size_t page_size_ = 0;
    bool sync_ = false;
    std::atomic<PageNo> page_count_{0};
    std::mutex header_mu_;
    mutable std::atomic<std::uint64_t> reads_{0};
    std::atomic<std::uint64_t> writes_{0};
};

} // namespace chronodb
