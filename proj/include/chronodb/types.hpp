#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>

namespace chronodb {

using PageNo = std::uint32_t;
using TxnId = std::uint64_t;

inline constexpr PageNo kNilPage = 0xFFFF'FFFFu;

// Log sequence number. Numbers are dense: every appended record takes the
// next integer, so LSN order is append order. Zero is nil.
struct Lsn {
    std::uint64_t value = 0;

    constexpr Lsn() = default;
    constexpr explicit Lsn(std::uint64_t v) : value(v) {}

    [[nodiscard]] constexpr bool is_nil() const { return value == 0; }
    [[nodiscard]] constexpr Lsn next() const { return Lsn{value + 1}; }
    [[nodiscard]] constexpr Lsn prev() const { return Lsn{value == 0 ? 0 : value - 1}; }

    constexpr auto operator<=>(const Lsn &) const = default;
};

inline constexpr Lsn kNilLsn{};

inline std::ostream &operator<<(std::ostream &os, Lsn lsn) { return os << lsn.value; }

struct PageId {
    std::uint16_t file_id = 0;
    PageNo page_no = 0;

    constexpr auto operator<=>(const PageId &) const = default;
};

enum class PageType : std::uint8_t {
    Free = 0,
    BtreeLeaf = 1,
    BtreeInternal = 2,
    AllocMap = 3,
    Catalog = 4,
};

[[nodiscard]] constexpr bool is_leaf_type(PageType t)
{
    return t == PageType::BtreeLeaf || t == PageType::Catalog;
}

struct Row {
    std::string key;
    std::string value;

    auto operator<=>(const Row &) const = default;
};

} // namespace chronodb

template <>
struct std::hash<chronodb::Lsn> {
    std::size_t operator()(chronodb::Lsn lsn) const noexcept { return std::hash<std::uint64_t>{}(lsn.value); }
};
