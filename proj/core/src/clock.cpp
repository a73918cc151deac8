// SPDX-License-Identifier: Apache-2.0
#include "ssc/clock.hpp"

#include <cctype>
#include <cstdio>
#include <ctime>

namespace ssc {

std::string format_timestamp(Timestamp ts) {
    const auto ms = to_epoch_ms(ts);
    auto secs = static_cast<std::time_t>(ms / 1000);
    auto frac = static_cast<int>(ms % 1000);
    if (frac < 0) {
        frac += 1000;
        --secs;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf;
}

namespace {

bool digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    out = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        out = out * 10 + (s[i] - '0');
    }
    return true;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view s) {
    // YYYY-MM-DDTHH:MM:SS.mmmZ
    if (s.size() != 24) return std::nullopt;
    if (s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':' || s[19] != '.' ||
        s[23] != 'Z')
        return std::nullopt;
    int year, mon, day, hour, min, sec, milli;
    if (!digits(s, 0, 4, year) || !digits(s, 5, 2, mon) || !digits(s, 8, 2, day) || !digits(s, 11, 2, hour) ||
        !digits(s, 14, 2, min) || !digits(s, 17, 2, sec) || !digits(s, 20, 3, milli))
        return std::nullopt;
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(mon)},
                             std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hour > 23 || min > 59 || sec > 59) return std::nullopt;
    const auto tp = sys_days{ymd} + hours{hour} + minutes{min} + seconds{sec} + milliseconds{milli};
    return time_point_cast<Millis>(tp);
}

}  // namespace ssc
