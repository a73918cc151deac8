// SPDX-License-Identifier: Apache-2.0
#include "ssc/storage.hpp"

#include "ssc/error.hpp"

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <unistd.h>

namespace ssc {

AppendLog::AppendLog(std::filesystem::path path, bool fsync_each) : path_(std::move(path)), fsync_each_(fsync_each) {
    std::error_code ec;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) fail(ErrorCode::StorageFailure, "cannot open " + path_.string() + ": " + std::strerror(errno));
}

AppendLog::~AppendLog() {
    if (fd_ >= 0) ::close(fd_);
}

void AppendLog::replay(const std::function<void(const nlohmann::json&, std::size_t)>& fn) const {
    if (path_.empty()) return;
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    std::uint64_t count = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            fail(ErrorCode::StorageCorrupt, path_.string() + ":" + std::to_string(lineno) + ": " + ex.what());
        }
        try {
            fn(rec, lineno);
        } catch (const Error& ex) {
            if (ex.code() == ErrorCode::StorageCorrupt) throw;
            fail(ErrorCode::StorageCorrupt, path_.string() + ":" + std::to_string(lineno) + ": " + ex.what());
        } catch (const std::exception& ex) {
            fail(ErrorCode::StorageCorrupt, path_.string() + ":" + std::to_string(lineno) + ": " + ex.what());
        }
        ++count;
    }
    records_ = count;
}

void AppendLog::append(const nlohmann::json& record) {
    if (inject_failure_) fail(ErrorCode::StorageFailure, "injected write failure on " + path_.string());
    if (fd_ < 0) {
        ++records_;
        return;
    }
    std::string line = record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    line.push_back('\n');
    std::lock_guard lock(mu_);
    std::size_t off = 0;
    while (off < line.size()) {
        const auto n = ::write(fd_, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            last_write_failed_ = true;
            fail(ErrorCode::StorageFailure, "write to " + path_.string() + ": " + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
    if (fsync_each_ && ::fsync(fd_) != 0) {
        last_write_failed_ = true;
        fail(ErrorCode::StorageFailure, "fsync " + path_.string() + ": " + std::strerror(errno));
    }
    last_write_failed_ = false;
    ++records_;
}

}  // namespace ssc
