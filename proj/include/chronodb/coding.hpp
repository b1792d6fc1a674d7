#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace chronodb {

// Little-endian fixed-width helpers. Everything on disk goes through these.

inline void put_u16(std::uint8_t *dst, std::uint16_t v)
{
    dst[0] = static_cast<std::uint8_t>(v);
    dst[1] = static_cast<std::uint8_t>(v >> 8);
}

inline void put_u32(std::uint8_t *dst, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        dst[i] = static_cast<std::uint8_t>(v >> (8 * i));
    }
}

inline void put_u64(std::uint8_t *dst, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) {
        dst[i] = static_cast<std::uint8_t>(v >> (8 * i));
    }
}

inline std::uint16_t get_u16(const std::uint8_t *src)
{
    return static_cast<std::uint16_t>(src[0] | (src[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t *src)
{
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | src[i];
    }
    return v;
}

inline std::uint64_t get_u64(const std::uint8_t *src)
{
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | src[i];
    }
    return v;
}

[[nodiscard]] std::uint32_t crc32(std::span<const std::uint8_t> data, std::uint32_t seed = 0);
[[nodiscard]] std::uint32_t crc32(std::string_view data, std::uint32_t seed = 0);

// Appends encoded values to a byte string.
class Encoder
{
public:
    explicit Encoder(std::string &out) : out_(&out) {}

    void u8(std::uint8_t v) { out_->push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    // Length-prefixed (u32) byte string.
    void bytes(std::string_view v);
    void raw(std::string_view v) { out_->append(v); }

private:
    std::string *out_;
};

// Reads values back; throws CorruptRecord on underflow.
class Decoder
{
public:
    explicit Decoder(std::string_view in) : in_(in) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    std::string bytes();
    [[nodiscard]] bool empty() const { return pos_ == in_.size(); }
    [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }

private:
    const std::uint8_t *take(std::size_t n);

    std::string_view in_;
    std::size_t pos_ = 0;
};

} // namespace chronodb
