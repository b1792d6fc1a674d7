#include "chronodb/clock.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace chronodb {

std::int64_t SystemClock::now_micros() const
{
    using namespace std::chrono;
    return duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
}

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d)
{
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t &y, unsigned &m, unsigned &d)
{
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
}

bool read_int(std::string_view &s, std::size_t digits, int &out)
{
    if (s.size() < digits) {
        return false;
    }
    const auto *end = s.data() + digits;
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        return false;
    }
    s.remove_prefix(digits);
    return true;
}

bool expect(std::string_view &s, char c)
{
    if (s.empty() || s.front() != c) {
        return false;
    }
    s.remove_prefix(1);
    return true;
}

} // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view text)
{
    int year, month, day, hour, minute, second;
    if (!read_int(text, 4, year) || !expect(text, '-') || !read_int(text, 2, month) ||
        !expect(text, '-') || !read_int(text, 2, day)) {
        return std::nullopt;
    }
    if (!(expect(text, ' ') || expect(text, 'T')) || !read_int(text, 2, hour) || !expect(text, ':') ||
        !read_int(text, 2, minute) || !expect(text, ':') || !read_int(text, 2, second)) {
        return std::nullopt;
    }
    std::int64_t frac = 0;
    if (!text.empty()) {
        if (!expect(text, '.') || text.empty() || text.size() > 6) {
            return std::nullopt;
        }
        int digits = static_cast<int>(text.size());
        int value = 0;
        if (!read_int(text, text.size(), value)) {
            return std::nullopt;
        }
        frac = value;
        for (int i = digits; i < 6; ++i) {
            frac *= 10;
        }
    }
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
        return std::nullopt;
    }
    const auto days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
    const std::int64_t secs = days * 86400 + hour * 3600 + minute * 60 + second;
    return secs * kMicrosPerSecond + frac;
}

std::string format_timestamp(std::int64_t micros)
{
    std::int64_t secs = micros / kMicrosPerSecond;
    std::int64_t frac = micros % kMicrosPerSecond;
    if (frac < 0) {
        frac += kMicrosPerSecond;
        --secs;
    }
    std::int64_t days = secs / 86400;
    std::int64_t rem = secs % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    std::int64_t y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u %02lld:%02lld:%02lld.%03lld", static_cast<long long>(y), m, d,
                  static_cast<long long>(rem / 3600), static_cast<long long>(rem / 60 % 60),
                  static_cast<long long>(rem % 60), static_cast<long long>(frac / 1000));
    return buf;
}

std::optional<std::int64_t> parse_duration(std::string_view text)
{
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || value < 0) {
        return std::nullopt;
    }
    std::string_view unit(ptr, static_cast<std::size_t>(text.data() + text.size() - ptr));
    if (unit.empty() || unit == "s") {
        return value * kMicrosPerSecond;
    }
    if (unit == "ms") {
        return value * 1000;
    }
    if (unit == "us") {
        return value;
    }
    if (unit == "m" || unit == "min") {
        return value * kMicrosPerMinute;
    }
    if (unit == "h") {
        return value * kMicrosPerHour;
    }
    if (unit == "d") {
        return value * 24 * kMicrosPerHour;
    }
    return std::nullopt;
}

} // namespace chronodb
