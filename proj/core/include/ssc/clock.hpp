// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ssc {

using Millis = std::chrono::milliseconds;
/// UTC wall-clock instant at millisecond precision.
using Timestamp = std::chrono::sys_time<Millis>;

/// "2026-10-18T09:15:02.123Z"
std::string format_timestamp(Timestamp ts);
/// Strict inverse of format_timestamp; nullopt on any deviation from the layout.
std::optional<Timestamp> parse_timestamp(std::string_view text);

inline std::int64_t to_epoch_ms(Timestamp ts) { return ts.time_since_epoch().count(); }
inline Timestamp from_epoch_ms(std::int64_t ms) { return Timestamp{Millis{ms}}; }

class Clock {
public:
    virtual ~Clock() = default;
    virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
public:
    Timestamp now() const override {
        return std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now());
    }
};

/// Test clock; only moves when told to.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Timestamp start = from_epoch_ms(1'700'000'000'000)) : now_ms_(to_epoch_ms(start)) {}

    Timestamp now() const override { return from_epoch_ms(now_ms_.load()); }
    void advance(Millis by) { now_ms_ += by.count(); }
    void set(Timestamp ts) { now_ms_ = to_epoch_ms(ts); }

private:
    std::atomic<std::int64_t> now_ms_;
};

}  // namespace ssc
