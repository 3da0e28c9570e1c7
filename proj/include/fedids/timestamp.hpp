#ifndef FEDIDS_TIMESTAMP_HPP
#define FEDIDS_TIMESTAMP_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace fedids {

using Micros = std::chrono::microseconds;
using Timestamp = std::chrono::sys_time<Micros>;

inline double to_ms(Micros d) { return static_cast<double>(d.count()) / 1000.0; }

/// Renders "YYYY-MM-DD HH:MM:SS.ffffff" (UTC, microsecond precision).
inline std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss<Micros> tod{t - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d.%06lld",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(tod.hours().count()),
                  static_cast<int>(tod.minutes().count()), static_cast<int>(tod.seconds().count()),
                  static_cast<long long>(tod.subseconds().count()));
    return buf;
}

inline constexpr std::size_t kTimestampWidth = 26;

/// Strict inverse of format_timestamp. Returns nullopt on any deviation from
/// the fixed-width layout or on an impossible calendar date.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    using namespace std::chrono;
    if (s.size() != kTimestampWidth) return std::nullopt;
    auto digits = [&](std::size_t pos, std::size_t n, long long& out) {
        out = 0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            if (s[i] < '0' || s[i] > '9') return false;
            out = out * 10 + (s[i] - '0');
        }
        return true;
    };
    if (s[4] != '-' || s[7] != '-' || s[10] != ' ' || s[13] != ':' || s[16] != ':' || s[19] != '.')
        return std::nullopt;
    long long y, mo, d, h, mi, sec, us;
    if (!digits(0, 4, y) || !digits(5, 2, mo) || !digits(8, 2, d) || !digits(11, 2, h) ||
        !digits(14, 2, mi) || !digits(17, 2, sec) || !digits(20, 6, us))
        return std::nullopt;
    if (h > 23 || mi > 59 || sec > 59) return std::nullopt;
    const year_month_day ymd{year{static_cast<int>(y)}, month{static_cast<unsigned>(mo)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return Timestamp{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{sec} + Micros{us};
}

} // namespace fedids

#endif // FEDIDS_TIMESTAMP_HPP
