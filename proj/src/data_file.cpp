#include "chronodb/data_file.hpp"
#include "chronodb/coding.hpp"
#include "chronodb/error.hpp"

#include <fcntl.h>
#include <unistd.h>

namespace chronodb {

namespace {
constexpr std::uint32_t kFileMagic = 0x46424443; // "CDBF"
constexpr std::uint32_t kFileVersion = 1;
constexpr std::size_t kHeaderBytes = 20;

std::size_t read_at(int fd, std::uint8_t *buf, std::size_t len, std::uint64_t off)
{
    std::size_t done = 0;
    while (done < len) {
        const auto n = ::pread(fd, buf + done, len - done, static_cast<off_t>(off + done));
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno("data file read");
        }
        if (n == 0) {
            break;
        }
        done += static_cast<std::size_t>(n);
    }
    return done;
}

void write_at(int fd, const std::uint8_t *buf, std::size_t len, std::uint64_t off)
{
    std::size_t done = 0;
    while (done < len) {
        const auto n = ::pwrite(fd, buf + done, len - done, static_cast<off_t>(off + done));
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno("data file write");
        }
        done += static_cast<std::size_t>(n);
    }
}

struct Header {
    std::size_t page_size = 0;
    PageNo page_count = 0;
};

std::optional<Header> parse_header(const std::uint8_t *p)
{
    if (get_u32(p) != kFileMagic) {
        return std::nullopt;
    }
    if (crc32(std::span<const std::uint8_t>(p, 16)) != get_u32(p + 16)) {
        throw Error(Errc::ChecksumMismatch, "data file header checksum mismatch");
    }
    return Header{get_u32(p + 8), get_u32(p + 12)};
}

} // namespace

std::size_t DataFile::stored_page_size(const std::filesystem::path &path)
{
    const int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) {
        throw_errno("open " + path.string());
    }
    std::uint8_t buf[kHeaderBytes] = {};
    const auto n = read_at(fd, buf, sizeof buf, 0);
    ::close(fd);
    const auto h = n == sizeof buf ? parse_header(buf) : std::nullopt;
    if (!h) {
        throw Error(Errc::CorruptRecord, "not a data file: " + path.string());
    }
    return h->page_size;
}

DataFile::DataFile(std::filesystem::path path, std::size_t page_size, bool sync)
    : path_(std::move(path)), page_size_(page_size), sync_(sync)
{
    const bool existed = std::filesystem::exists(path_);
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) {
        throw_errno("open " + path_.string());
    }
    if (existed) {
        std::uint8_t buf[kHeaderBytes] = {};
        const auto n = read_at(fd_, buf, sizeof buf, 0);
        const auto h = n == sizeof buf ? parse_header(buf) : std::nullopt;
        if (!h) {
            throw Error(Errc::CorruptRecord, "not a data file: " + path_.string());
        }
        page_size_ = h->page_size;
        page_count_ = h->page_count;
    } else {
        if (page_size_ < Page::kMinPageSize || page_size_ > Page::kMaxPageSize ||
            (page_size_ & (page_size_ - 1)) != 0) {
            throw Error(Errc::InvalidArgument, "page size must be a power of two in [512, 32768]");
        }
        page_count_ = 1;
        write_header();
    }
}

DataFile::~DataFile()
{
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

void DataFile::write_header()
{
    std::vector<std::uint8_t> buf(page_size_, 0);
    put_u32(buf.data(), kFileMagic);
    put_u32(buf.data() + 4, kFileVersion);
    put_u32(buf.data() + 8, static_cast<std::uint32_t>(page_size_));
    put_u32(buf.data() + 12, page_count_.load());
    put_u32(buf.data() + 16, crc32(std::span<const std::uint8_t>(buf.data(), 16)));
    write_at(fd_, buf.data(), buf.size(), 0);
}

void DataFile::set_page_count(PageNo n)
{
    std::lock_guard lock(header_mu_);
    if (n == page_count_.load()) {
        return;
    }
    page_count_ = n;
    write_header();
}

void DataFile::read(PageNo no, Page &out) const
{
    if (no == 0) {
        throw Error(Errc::PageOutOfRange, "page 0 holds the file header");
    }
    if (out.size() != page_size_) {
        out = Page(page_size_);
    }
    ++reads_;
    const auto n = read_at(fd_, out.data(), page_size_, static_cast<std::uint64_t>(no) * page_size_);
    if (n < page_size_) {
        std::fill(out.data() + n, out.data() + page_size_, 0);
    }
    if (out.is_zero()) {
        return;
    }
    if (out.checksum() != out.compute_checksum()) {
        throw Error(Errc::ChecksumMismatch, "checksum mismatch on page " + std::to_string(no));
    }
    out.set_checksum(0);
}

void DataFile::write(PageNo no, const Page &page)
{
    if (no == 0) {
        throw Error(Errc::PageOutOfRange, "refusing to overwrite the file header");
    }
    Page copy = page;
    copy.set_checksum(copy.compute_checksum());
    write_at(fd_, copy.data(), page_size_, static_cast<std::uint64_t>(no) * page_size_);
    ++writes_;
}

void DataFile::sync()
{
    if (sync_ && ::fdatasync(fd_) != 0) {
        throw_errno("data file sync");
    }
}

} // namespace chronodb
