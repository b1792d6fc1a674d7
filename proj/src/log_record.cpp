#include "chronodb/log_record.hpp"
#include "chronodb/coding.hpp"
#include "chronodb/error.hpp"

namespace chronodb {

const char *to_string(RecordKind kind)
{
    switch (kind) {
    case RecordKind::Format: return "Format";
    case RecordKind::Preformat: return "Preformat";
    case RecordKind::Insert: return "Insert";
    case RecordKind::Delete: return "Delete";
    case RecordKind::Update: return "Update";
    case RecordKind::Clr: return "Clr";
    case RecordKind::TxnBegin: return "TxnBegin";
    case RecordKind::TxnCommit: return "TxnCommit";
    case RecordKind::TxnAbortEnd: return "TxnAbortEnd";
    case RecordKind::Alloc: return "Alloc";
    case RecordKind::Dealloc: return "Dealloc";
    case RecordKind::CheckpointBegin: return "CheckpointBegin";
    case RecordKind::CheckpointEnd: return "CheckpointEnd";
    }
    return "?";
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

RecordKind body_kind(const RecordBody &body)
{
    return std::visit(overloaded{
                          [](const FormatPage &) { return RecordKind::Format; },
                          [](const PreformatPage &) { return RecordKind::Preformat; },
                          [](const InsertRow &) { return RecordKind::Insert; },
                          [](const DeleteRow &) { return RecordKind::Delete; },
                          [](const UpdateRow &) { return RecordKind::Update; },
                          [](const Compensation &) { return RecordKind::Clr; },
                          [](const TxnBegin &) { return RecordKind::TxnBegin; },
                          [](const TxnCommit &) { return RecordKind::TxnCommit; },
                          [](const TxnAbortEnd &) { return RecordKind::TxnAbortEnd; },
                          [](const AllocPage &) { return RecordKind::Alloc; },
                          [](const DeallocPage &) { return RecordKind::Dealloc; },
                          [](const CheckpointBegin &) { return RecordKind::CheckpointBegin; },
                          [](const CheckpointEnd &) { return RecordKind::CheckpointEnd; },
                      },
                      body);
}

void encode_action(Encoder &enc, const PageAction &action)
{
    std::visit(overloaded{
                   [&](const FormatPage &a) {
                       enc.u8(static_cast<std::uint8_t>(a.type));
                       enc.u8(static_cast<std::uint8_t>(a.prior));
                       enc.u8(static_cast<std::uint8_t>(a.prior_type));
                   },
                   [&](const PreformatPage &a) {
                       enc.u8(static_cast<std::uint8_t>(a.reason));
                       enc.bytes(a.image);
                   },
                   [&](const InsertRow &a) {
                       enc.u32(a.root);
                       enc.u16(a.slot);
                       enc.bytes(a.row);
                   },
                   [&](const DeleteRow &a) {
                       enc.u32(a.root);
                       enc.u16(a.slot);
                       enc.bytes(a.row);
                   },
                   [&](const UpdateRow &a) {
                       enc.u32(a.root);
                       enc.u16(a.slot);
                       enc.bytes(a.before);
                       enc.bytes(a.after);
                   },
                   [&](const AllocPage &a) {
                       enc.u32(a.target);
                       enc.u8(static_cast<std::uint8_t>(a.type));
                       enc.u8(a.first_ever ? 1 : 0);
                   },
                   [&](const DeallocPage &a) { enc.u32(a.target); },
               },
               action);
}

PageAction decode_action(Decoder &dec, RecordKind kind)
{
    switch (kind) {
    case RecordKind::Format: {
        FormatPage a;
        a.type = static_cast<PageType>(dec.u8());
        a.prior = static_cast<FormatPrior>(dec.u8());
        a.prior_type = static_cast<PageType>(dec.u8());
        return a;
    }
    case RecordKind::Preformat: {
        PreformatPage a;
        a.reason = static_cast<PreformatReason>(dec.u8());
        a.image = dec.bytes();
        return a;
    }
    case RecordKind::Insert: {
        InsertRow a;
        a.root = dec.u32();
        a.slot = dec.u16();
        a.row = dec.bytes();
        return a;
    }
    case RecordKind::Delete: {
        DeleteRow a;
        a.root = dec.u32();
        a.slot = dec.u16();
        a.row = dec.bytes();
        return a;
    }
    case RecordKind::Update: {
        UpdateRow a;
        a.root = dec.u32();
        a.slot = dec.u16();
        a.before = dec.bytes();
        a.after = dec.bytes();
        return a;
    }
    case RecordKind::Alloc: {
        AllocPage a;
        a.target = dec.u32();
        a.type = static_cast<PageType>(dec.u8());
        a.first_ever = dec.u8() != 0;
        return a;
    }
    case RecordKind::Dealloc: {
        DeallocPage a;
        a.target = dec.u32();
        return a;
    }
    default:
        throw Error(Errc::CorruptRecord, std::string("not a page action: ") + to_string(kind));
    }
}

} // namespace

RecordKind LogRecord::kind() const { return body_kind(body); }

RecordKind action_kind(const PageAction &action)
{
    return std::visit([](const auto &a) { return body_kind(RecordBody{a}); }, action);
}

RecordBody to_body(PageAction action)
{
    return std::visit([](auto &&a) -> RecordBody { return RecordBody{std::move(a)}; }, std::move(action));
}

bool is_page_mutation(const LogRecord &rec)
{
    switch (rec.kind()) {
    case RecordKind::Format:
    case RecordKind::Insert:
    case RecordKind::Delete:
    case RecordKind::Update:
    case RecordKind::Clr:
    case RecordKind::Alloc:
    case RecordKind::Dealloc:
        return true;
    default:
        return false;
    }
}

std::string encode_record(const LogRecord &rec)
{
    std::string out;
    Encoder enc(out);
    enc.u64(rec.lsn.value);
    enc.u64(rec.txn);
    enc.u64(rec.prev_lsn.value);
    enc.u32(rec.page);
    enc.u16(rec.file_id);
    enc.u64(rec.prev_page_lsn.value);
    enc.u8(rec.flags);
    const auto kind = rec.kind();
    enc.u8(static_cast<std::uint8_t>(kind));
    std::visit(overloaded{
                   [&](const Compensation &c) {
                       enc.u64(c.undone.value);
                       enc.u64(c.undo_next.value);
                       enc.u8(static_cast<std::uint8_t>(action_kind(c.action)));
                       encode_action(enc, c.action);
                   },
                   [&](const TxnBegin &) {},
                   [&](const TxnAbortEnd &) {},
                   [&](const TxnCommit &c) { enc.i64(c.wall_micros); },
                   [&](const CheckpointBegin &c) { enc.i64(c.wall_micros); },
                   [&](const CheckpointEnd &c) {
                       enc.u64(c.begin.value);
                       enc.u64(c.next_txn_id);
                       enc.u32(static_cast<std::uint32_t>(c.active.size()));
                       for (const auto &a : c.active) {
                           enc.u64(a.txn);
                           enc.u64(a.first_lsn.value);
                           enc.u64(a.last_lsn.value);
                       }
                   },
                   [&](const auto &action) { encode_action(enc, PageAction{action}); },
               },
               rec.body);
    return out;
}

LogRecord decode_record(std::string_view bytes)
{
    Decoder dec(bytes);
    LogRecord rec;
    rec.lsn = Lsn{dec.u64()};
    rec.txn = dec.u64();
    rec.prev_lsn = Lsn{dec.u64()};
    rec.page = dec.u32();
    rec.file_id = dec.u16();
    rec.prev_page_lsn = Lsn{dec.u64()};
    rec.flags = dec.u8();
    const auto kind = static_cast<RecordKind>(dec.u8());
    switch (kind) {
    case RecordKind::Clr: {
        Compensation c;
        c.undone = Lsn{dec.u64()};
        c.undo_next = Lsn{dec.u64()};
        const auto inner = static_cast<RecordKind>(dec.u8());
        c.action = decode_action(dec, inner);
        rec.body = std::move(c);
        break;
    }
    case RecordKind::TxnBegin: rec.body = TxnBegin{}; break;
    case RecordKind::TxnAbortEnd: rec.body = TxnAbortEnd{}; break;
    case RecordKind::TxnCommit: rec.body = TxnCommit{dec.i64()}; break;
    case RecordKind::CheckpointBegin: rec.body = CheckpointBegin{dec.i64()}; break;
    case RecordKind::CheckpointEnd: {
        CheckpointEnd c;
        c.begin = Lsn{dec.u64()};
        c.next_txn_id = dec.u64();
        const auto n = dec.u32();
        if (n > dec.remaining() / 24) {
            throw Error(Errc::CorruptRecord, "active transaction table overruns record");
        }
        c.active.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            ActiveTxn a;
            a.txn = dec.u64();
            a.first_lsn = Lsn{dec.u64()};
            a.last_lsn = Lsn{dec.u64()};
            c.active.push_back(a);
        }
        rec.body = std::move(c);
        break;
    }
    case RecordKind::Format:
    case RecordKind::Preformat:
    case RecordKind::Insert:
    case RecordKind::Delete:
    case RecordKind::Update:
    case RecordKind::Alloc:
    case RecordKind::Dealloc:
        rec.body = to_body(decode_action(dec, kind));
        break;
    default:
        throw Error(Errc::CorruptRecord, "unknown record kind " + std::to_string(static_cast<int>(kind)));
    }
    if (!dec.empty()) {
        throw Error(Errc::CorruptRecord, "trailing bytes in record " + std::to_string(rec.lsn.value));
    }
    return rec;
}

std::string encode_leaf_row(std::string_view key, std::string_view value)
{
    std::string out;
    out.reserve(2 + key.size() + value.size());
    Encoder enc(out);
    enc.u16(static_cast<std::uint16_t>(key.size()));
    enc.raw(key);
    enc.raw(value);
    return out;
}

std::string encode_internal_row(std::string_view key, PageNo child)
{
    std::string out;
    out.reserve(6 + key.size());
    Encoder enc(out);
    enc.u16(static_cast<std::uint16_t>(key.size()));
    enc.raw(key);
    enc.u32(child);
    return out;
}

std::string_view row_key(std::string_view row)
{
    const auto len = get_u16(reinterpret_cast<const std::uint8_t *>(row.data()));
    return row.substr(2, len);
}

std::string_view row_value(std::string_view row)
{
    const auto len = get_u16(reinterpret_cast<const std::uint8_t *>(row.data()));
    return row.substr(2 + len);
}

PageNo row_child(std::string_view row)
{
    const auto value = row_value(row);
    return get_u32(reinterpret_cast<const std::uint8_t *>(value.data()));
}

} // namespace chronodb
