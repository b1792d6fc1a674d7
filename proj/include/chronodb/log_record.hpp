#pragma once

#include "chronodb/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace chronodb {

enum class RecordKind : std::uint8_t {
    Format = 1,
    Preformat,
    Insert,
    Delete,
    Update,
    Clr,
    TxnBegin,
    TxnCommit,
    TxnAbortEnd,
    Alloc,
    Dealloc,
    CheckpointBegin,
    CheckpointEnd,
};

[[nodiscard]] const char *to_string(RecordKind kind);

// Record flags.
inline constexpr std::uint8_t kFlagSmo = 0x01;      // part of a B-tree structure modification
inline constexpr std::uint8_t kFlagInGroup = 0x02;  // member of an atomic record group
inline constexpr std::uint8_t kFlagGroupEnd = 0x04; // last member of its group

// What the page looked like before a Format record reset it.
enum class FormatPrior : std::uint8_t {
    Zero = 0,          // never-written page
    Empty = 1,         // empty slotted page of prior_type (root leaf becoming internal)
    FromPreformat = 2, // reallocation; the preceding Preformat on the page holds the image
};

enum class PreformatReason : std::uint8_t { Realloc = 1, Periodic = 2 };

struct FormatPage {
    PageType type = PageType::Free;
    FormatPrior prior = FormatPrior::Zero;
    PageType prior_type = PageType::Free;

    bool operator==(const FormatPage &) const = default;
};

// Full page image as it stood immediately before this record.
struct PreformatPage {
    PreformatReason reason = PreformatReason::Periodic;
    std::string image;

    bool operator==(const PreformatPage &) const = default;
};

struct InsertRow {
    PageNo root = kNilPage;
    std::uint16_t slot = 0;
    std::string row;

    bool operator==(const InsertRow &) const = default;
};

// Carries the deleted row so the record is undoable on its own.
struct DeleteRow {
    PageNo root = kNilPage;
    std::uint16_t slot = 0;
    std::string row;

    bool operator==(const DeleteRow &) const = default;
};

struct UpdateRow {
    PageNo root = kNilPage;
    std::uint16_t slot = 0;
    std::string before;
    std::string after;

    bool operator==(const UpdateRow &) const = default;
};

// Allocation-map mutations; the record's page is the map page.
struct AllocPage {
    PageNo target = kNilPage;
    PageType type = PageType::Free;
    bool first_ever = false;

    bool operator==(const AllocPage &) const = default;
};

struct DeallocPage {
    PageNo target = kNilPage;

    bool operator==(const DeallocPage &) const = default;
};

using PageAction =
    std::variant<FormatPage, PreformatPage, InsertRow, DeleteRow, UpdateRow, AllocPage, DeallocPage>;

// Compensation record: redo applies `action`; undo applies its inverse. The
// compensation is reversible from this record alone.
struct Compensation {
    Lsn undone;
    Lsn undo_next;
    PageAction action;

    bool operator==(const Compensation &) const = default;
};

struct TxnBegin {
    bool operator==(const TxnBegin &) const = default;
};
struct TxnCommit {
    std::int64_t wall_micros = 0;

    bool operator==(const TxnCommit &) const = default;
};
struct TxnAbortEnd {
    bool operator==(const TxnAbortEnd &) const = default;
};

struct CheckpointBegin {
    std::int64_t wall_micros = 0;

    bool operator==(const CheckpointBegin &) const = default;
};

struct ActiveTxn {
    TxnId txn = 0;
    Lsn first_lsn;
    Lsn last_lsn;

    bool operator==(const ActiveTxn &) const = default;
};

struct CheckpointEnd {
    Lsn begin;
    TxnId next_txn_id = 1;
    std::vector<ActiveTxn> active;

    bool operator==(const CheckpointEnd &) const = default;
};

using RecordBody = std::variant<FormatPage, PreformatPage, InsertRow, DeleteRow, UpdateRow, Compensation,
                                TxnBegin, TxnCommit, TxnAbortEnd, AllocPage, DeallocPage, CheckpointBegin,
                                CheckpointEnd>;

struct LogRecord {
    Lsn lsn;
    TxnId txn = 0;
    Lsn prev_lsn;
    PageNo page = kNilPage;
    std::uint16_t file_id = 0;
    Lsn prev_page_lsn;
    std::uint8_t flags = 0;
    RecordBody body;

    [[nodiscard]] RecordKind kind() const;
    [[nodiscard]] bool has_page() const { return page != kNilPage; }
    [[nodiscard]] bool is_smo() const { return (flags & kFlagSmo) != 0; }

    bool operator==(const LogRecord &) const = default;
};

// True for records that count as a page mutation (everything that touches a
// page except full-image Preformat records).
[[nodiscard]] bool is_page_mutation(const LogRecord &rec);

[[nodiscard]] RecordKind action_kind(const PageAction &action);
[[nodiscard]] RecordBody to_body(PageAction action);

// Record body encoding (without the frame length/CRC).
[[nodiscard]] std::string encode_record(const LogRecord &rec);
[[nodiscard]] LogRecord decode_record(std::string_view bytes);

// Leaf rows are [u16 key length][key][value]; internal rows are
// [u16 key length][key][u32 child page].
[[nodiscard]] std::string encode_leaf_row(std::string_view key, std::string_view value);
[[nodiscard]] std::string encode_internal_row(std::string_view key, PageNo child);
[[nodiscard]] std::string_view row_key(std::string_view row);
[[nodiscard]] std::string_view row_value(std::string_view row);
[[nodiscard]] PageNo row_child(std::string_view row);

} // namespace chronodb
