#pragma once

#include "chronodb/types.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace chronodb {

// Fixed-size page image.
//
// Header (32 bytes, little-endian):
//   0  u32 checksum        CRC-32 of bytes [4, page_size); zero while in memory
//   4  u32 page_no
//   8  u16 file_id
//  10  u8  page_type
//  11  u8  reserved
//  12  u32 mutation_count  page mutations ever applied (drives periodic images)
//  16  u64 page_lsn
//  24  u16 slot_count
//  26  u16 data_end        end of the packed row area
//  28  u32 reserved
//
// Slotted pages keep rows packed in slot order immediately after the header
// and the slot directory (u16 offset, u16 length per slot) growing down from
// the end of the page. Every mutation keeps this layout canonical, so a page
// image is a pure function of its header fields and its row list; this makes
// page-level undo byte-exact. Allocation-map pages use the body as a bitmap
// with two bits per tracked page: bit 0 allocated, bit 1 ever allocated.
class Page
{
public:
    static constexpr std::size_t kHeaderSize = 32;
    static constexpr std::size_t kSlotSize = 4;
    static constexpr std::size_t kMinPageSize = 512;
    static constexpr std::size_t kMaxPageSize = 32768;

    Page() = default;
    explicit Page(std::size_t page_size) : buf_(page_size, 0) {}

    [[nodiscard]] std::size_t size() const { return buf_.size(); }
    [[nodiscard]] std::uint8_t *data() { return buf_.data(); }
    [[nodiscard]] const std::uint8_t *data() const { return buf_.data(); }
    [[nodiscard]] std::span<const std::uint8_t> bytes() const { return buf_; }
    [[nodiscard]] std::span<std::uint8_t> bytes() { return buf_; }

    [[nodiscard]] std::uint32_t checksum() const;
    void set_checksum(std::uint32_t v);
    [[nodiscard]] std::uint32_t compute_checksum() const;

    [[nodiscard]] PageNo page_no() const;
    void set_page_no(PageNo no);
    [[nodiscard]] std::uint16_t file_id() const;
    [[nodiscard]] PageType type() const;
    void set_type(PageType t);
    [[nodiscard]] std::uint32_t mutation_count() const;
    void set_mutation_count(std::uint32_t n);
    [[nodiscard]] Lsn lsn() const;
    void set_lsn(Lsn lsn);

    [[nodiscard]] std::size_t slot_count() const;
    [[nodiscard]] std::size_t data_end() const;
    [[nodiscard]] std::string_view row(std::size_t slot) const;
    [[nodiscard]] std::size_t free_space() const;
    [[nodiscard]] bool can_insert(std::size_t row_len) const;
    [[nodiscard]] bool can_replace(std::size_t slot, std::size_t row_len) const;
    void insert_row(std::size_t slot, std::string_view row);
    void erase_row(std::size_t slot);
    void replace_row(std::size_t slot, std::string_view row);

    // Reset to an empty page of the given type. page_no, file_id and
    // mutation_count survive; the LSN is left to the caller.
    void format(PageType type);
    void clear();
    [[nodiscard]] bool is_zero() const;

    [[nodiscard]] bool map_allocated(std::size_t index) const;
    [[nodiscard]] bool map_ever_allocated(std::size_t index) const;
    void map_set(std::size_t index, bool allocated, bool ever);

    // Largest row a slotted page accepts: a quarter of the usable space.
    [[nodiscard]] static std::size_t max_row_size(std::size_t page_size);
    // Pages tracked by one allocation-map page.
    [[nodiscard]] static std::size_t map_capacity(std::size_t page_size);

    bool operator==(const Page &other) const = default;

private:
    void set_slot_count(std::size_t n);
    void set_data_end(std::size_t n);
    [[nodiscard]] std::size_t slot_pos(std::size_t slot) const { return buf_.size() - kSlotSize * (slot + 1); }

    std::vector<std::uint8_t> buf_;
};

} // namespace chronodb
