#include "chronodb/page.hpp"
#include "chronodb/coding.hpp"
#include "chronodb/error.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>

namespace chronodb {

namespace {
constexpr std::size_t kChecksumOff = 0;
constexpr std::size_t kPageNoOff = 4;
constexpr std::size_t kFileIdOff = 8;
constexpr std::size_t kTypeOff = 10;
constexpr std::size_t kMutationsOff = 12;
constexpr std::size_t kLsnOff = 16;
constexpr std::size_t kSlotCountOff = 24;
constexpr std::size_t kDataEndOff = 26;
} // namespace

std::uint32_t Page::checksum() const { return get_u32(buf_.data() + kChecksumOff); }
void Page::set_checksum(std::uint32_t v) { put_u32(buf_.data() + kChecksumOff, v); }

std::uint32_t Page::compute_checksum() const
{
    return crc32(std::span<const std::uint8_t>(buf_).subspan(4));
}

PageNo Page::page_no() const { return get_u32(buf_.data() + kPageNoOff); }
void Page::set_page_no(PageNo no) { put_u32(buf_.data() + kPageNoOff, no); }
std::uint16_t Page::file_id() const { return get_u16(buf_.data() + kFileIdOff); }
PageType Page::type() const { return static_cast<PageType>(buf_[kTypeOff]); }
void Page::set_type(PageType t) { buf_[kTypeOff] = static_cast<std::uint8_t>(t); }
std::uint32_t Page::mutation_count() const { return get_u32(buf_.data() + kMutationsOff); }
void Page::set_mutation_count(std::uint32_t n) { put_u32(buf_.data() + kMutationsOff, n); }
Lsn Page::lsn() const { return Lsn{get_u64(buf_.data() + kLsnOff)}; }
void Page::set_lsn(Lsn lsn) { put_u64(buf_.data() + kLsnOff, lsn.value); }
std::size_t Page::slot_count() const { return get_u16(buf_.data() + kSlotCountOff); }
void Page::set_slot_count(std::size_t n) { put_u16(buf_.data() + kSlotCountOff, static_cast<std::uint16_t>(n)); }

std::size_t Page::data_end() const
{
    const auto end = get_u16(buf_.data() + kDataEndOff);
    return end == 0 ? kHeaderSize : end;
}

void Page::set_data_end(std::size_t n) { put_u16(buf_.data() + kDataEndOff, static_cast<std::uint16_t>(n)); }

std::string_view Page::row(std::size_t slot) const
{
    if (slot >= slot_count()) {
        throw Error(Errc::UndoMismatch, "slot " + std::to_string(slot) + " out of range on page " +
                                            std::to_string(page_no()));
    }
    const auto *entry = buf_.data() + slot_pos(slot);
    return {reinterpret_cast<const char *>(buf_.data()) + get_u16(entry), get_u16(entry + 2)};
}

std::size_t Page::free_space() const
{
    const auto used = data_end() + kSlotSize * slot_count();
    return buf_.size() > used ? buf_.size() - used : 0;
}

bool Page::can_insert(std::size_t row_len) const { return row_len + kSlotSize <= free_space(); }

bool Page::can_replace(std::size_t slot, std::size_t row_len) const
{
    return row_len <= free_space() + row(slot).size();
}

void Page::insert_row(std::size_t slot, std::string_view row)
{
    const auto n = slot_count();
    assert(slot <= n);
    if (!can_insert(row.size())) {
        throw Error(Errc::UndoMismatch, "row does not fit on page " + std::to_string(page_no()));
    }
    const auto end = data_end();
    const std::size_t off = slot < n ? get_u16(buf_.data() + slot_pos(slot)) : end;
    auto *base = buf_.data();
    std::memmove(base + off + row.size(), base + off, end - off);
    std::memcpy(base + off, row.data(), row.size());

    // Directory entries for slots >= slot move one position down.
    const auto dir_lo = slot_pos(n - 1 + 1);
    const auto dir_hi = slot_pos(slot) + kSlotSize;
    if (slot < n) {
        std::memmove(base + dir_lo, base + dir_lo + kSlotSize, dir_hi - kSlotSize - dir_lo);
    }
    put_u16(base + slot_pos(slot), static_cast<std::uint16_t>(off));
    put_u16(base + slot_pos(slot) + 2, static_cast<std::uint16_t>(row.size()));
    for (std::size_t i = slot + 1; i <= n; ++i) {
        auto *e = base + slot_pos(i);
        put_u16(e, static_cast<std::uint16_t>(get_u16(e) + row.size()));
    }
    set_slot_count(n + 1);
    set_data_end(end + row.size());
}

void Page::erase_row(std::size_t slot)
{
    const auto n = slot_count();
    if (slot >= n) {
        throw Error(Errc::UndoMismatch, "erase of missing slot on page " + std::to_string(page_no()));
    }
    auto *base = buf_.data();
    const auto off = get_u16(base + slot_pos(slot));
    const auto len = get_u16(base + slot_pos(slot) + 2);
    const auto end = data_end();
    std::memmove(base + off, base + off + len, end - off - len);
    std::memset(base + end - len, 0, len);

    // Directory entries for slots > slot move one position up.
    const auto dir_lo = slot_pos(n - 1);
    const auto dir_hi = slot_pos(slot);
    std::memmove(base + dir_lo + kSlotSize, base + dir_lo, dir_hi - dir_lo);
    std::memset(base + dir_lo, 0, kSlotSize);
    for (std::size_t i = slot; i + 1 < n; ++i) {
        auto *e = base + slot_pos(i);
        put_u16(e, static_cast<std::uint16_t>(get_u16(e) - len));
    }
    set_slot_count(n - 1);
    const auto new_end = end - len;
    set_data_end(new_end == kHeaderSize ? 0 : new_end);
}

void Page::replace_row(std::size_t slot, std::string_view row)
{
    if (!can_replace(slot, row.size())) {
        throw Error(Errc::UndoMismatch, "replacement does not fit on page " + std::to_string(page_no()));
    }
    erase_row(slot);
    insert_row(slot, row);
}

void Page::format(PageType type)
{
    const auto no = page_no();
    const auto fid = file_id();
    const auto count = mutation_count();
    std::fill(buf_.begin(), buf_.end(), 0);
    set_page_no(no);
    put_u16(buf_.data() + kFileIdOff, fid);
    set_mutation_count(count);
    set_type(type);
}

void Page::clear() { std::fill(buf_.begin(), buf_.end(), 0); }

bool Page::is_zero() const
{
    return std::all_of(buf_.begin(), buf_.end(), [](std::uint8_t b) { return b == 0; });
}

bool Page::map_allocated(std::size_t index) const
{
    return (buf_[kHeaderSize + index / 4] >> ((index % 4) * 2)) & 1;
}

bool Page::map_ever_allocated(std::size_t index) const
{
    return (buf_[kHeaderSize + index / 4] >> ((index % 4) * 2 + 1)) & 1;
}

void Page::map_set(std::size_t index, bool allocated, bool ever)
{
    auto &byte = buf_[kHeaderSize + index / 4];
    const auto shift = (index % 4) * 2;
    byte = static_cast<std::uint8_t>((byte & ~(3u << shift)) |
                                     ((allocated ? 1u : 0u) << shift) | ((ever ? 2u : 0u) << shift));
}

std::size_t Page::max_row_size(std::size_t page_size)
{
    return (page_size - kHeaderSize) / 4 - kSlotSize;
}

std::size_t Page::map_capacity(std::size_t page_size) { return (page_size - kHeaderSize) * 4; }

} // namespace chronodb
