#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace chronodb {

// Wall-clock source in microseconds since the Unix epoch (UTC). Commit and
// checkpoint records are stamped from it.
class Clock
{
public:
    virtual ~Clock() = default;
    [[nodiscard]] virtual std::int64_t now_micros() const = 0;
};

class SystemClock final : public Clock
{
public:
    [[nodiscard]] std::int64_t now_micros() const override;
};

// Deterministic clock driven by tests and the workload generator.
class ManualClock final : public Clock
{
public:
    explicit ManualClock(std::int64_t start_micros = kDefaultEpoch) : now_(start_micros) {}

    [[nodiscard]] std::int64_t now_micros() const override { return now_.load(); }
    void set(std::int64_t micros) { now_.store(micros); }
    void advance(std::int64_t micros) { now_.fetch_add(micros); }

    // 2012-03-22 00:00:00 UTC
    static constexpr std::int64_t kDefaultEpoch = 1332374400LL * 1'000'000;

private:
    std::atomic<std::int64_t> now_;
};

inline constexpr std::int64_t kMicrosPerSecond = 1'000'000;
inline constexpr std::int64_t kMicrosPerMinute = 60 * kMicrosPerSecond;
inline constexpr std::int64_t kMicrosPerHour = 60 * kMicrosPerMinute;

// "YYYY-MM-DD HH:MM:SS.mmm" (UTC). Fractional part optional, 1-6 digits.
[[nodiscard]] std::optional<std::int64_t> parse_timestamp(std::string_view text);
[[nodiscard]] std::string format_timestamp(std::int64_t micros);

// "90s", "15m", "24h", "2d", "500ms" or a bare number of seconds.
[[nodiscard]] std::optional<std::int64_t> parse_duration(std::string_view text);

} // namespace chronodb
