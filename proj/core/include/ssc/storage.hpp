// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>

namespace ssc {

/// Append-only newline-delimited JSON log. Each append is a single write(2)
/// of one complete line, so a killed process leaves whole records behind.
/// A log without a path keeps nothing and is used by purely in-memory stores.
class AppendLog {
public:
    AppendLog() = default;
    explicit AppendLog(std::filesystem::path path, bool fsync_each = false);
    ~AppendLog();
    AppendLog(const AppendLog&) = delete;
    AppendLog& operator=(const AppendLog&) = delete;

    /// Calls `fn(record, line_number)` for every stored line in order. Throws
    /// Error{StorageCorrupt} naming file and line on unparseable input, or
    /// whatever `fn` throws (also reported as StorageCorrupt with the line).
    void replay(const std::function<void(const nlohmann::json&, std::size_t)>& fn) const;

    /// Throws Error{StorageFailure}; nothing is appended in that case.
    void append(const nlohmann::json& record);

    bool persistent() const { return fd_ >= 0; }
    const std::filesystem::path& path() const { return path_; }
    std::uint64_t records() const { return records_.load(); }
    bool healthy() const { return !inject_failure_.load() && !last_write_failed_.load(); }

    /// Test hook: make every subsequent append fail.
    void inject_failure(bool on) { inject_failure_ = on; }

private:
    std::filesystem::path path_;
    int fd_ = -1;
    bool fsync_each_ = false;
    std::mutex mu_;
    mutable std::atomic<std::uint64_t> records_{0};
    std::atomic<bool> inject_failure_{false};
    std::atomic<bool> last_write_failed_{false};
};

}  // namespace ssc
