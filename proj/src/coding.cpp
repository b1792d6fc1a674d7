#include "chronodb/coding.hpp"
#include "chronodb/error.hpp"

#include <zlib.h>

namespace chronodb {

std::uint32_t crc32(std::span<const std::uint8_t> data, std::uint32_t seed)
{
    return static_cast<std::uint32_t>(::crc32_z(seed, data.data(), data.size()));
}

std::uint32_t crc32(std::string_view data, std::uint32_t seed)
{
    return static_cast<std::uint32_t>(
        ::crc32_z(seed, reinterpret_cast<const Bytef *>(data.data()), data.size()));
}

void Encoder::u16(std::uint16_t v)
{
    std::uint8_t buf[2];
    put_u16(buf, v);
    out_->append(reinterpret_cast<const char *>(buf), sizeof(buf));
}

void Encoder::u32(std::uint32_t v)
{
    std::uint8_t buf[4];
    put_u32(buf, v);
    out_->append(reinterpret_cast<const char *>(buf), sizeof(buf));
}

void Encoder::u64(std::uint64_t v)
{
    std::uint8_t buf[8];
    put_u64(buf, v);
    out_->append(reinterpret_cast<const char *>(buf), sizeof(buf));
}

void Encoder::bytes(std::string_view v)
{
    u32(static_cast<std::uint32_t>(v.size()));
    out_->append(v);
}

const std::uint8_t *Decoder::take(std::size_t n)
{
    if (in_.size() - pos_ < n) {
        throw Error(Errc::CorruptRecord, "truncated field");
    }
    const auto *p = reinterpret_cast<const std::uint8_t *>(in_.data()) + pos_;
    pos_ += n;
    return p;
}

std::uint8_t Decoder::u8() { return *take(1); }
std::uint16_t Decoder::u16() { return get_u16(take(2)); }
std::uint32_t Decoder::u32() { return get_u32(take(4)); }
std::uint64_t Decoder::u64() { return get_u64(take(8)); }

std::string Decoder::bytes()
{
    const auto n = u32();
    const auto *p = take(n);
    return {reinterpret_cast<const char *>(p), n};
}

} // namespace chronodb
