// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ssc/clock.hpp"
#include "ssc/storage.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace ssc {

enum class AuditCategory {
    ExchangeRequest,
    ExchangeResponse,
    Publish,
    Deliver,
    OrchestrationTransition,
    TaskEvent,
    AuthEvent,
    Error,
};

enum class Outcome { Ok, Fault };

std::string_view to_string(AuditCategory c) noexcept;
std::optional<AuditCategory> parse_audit_category(std::string_view s) noexcept;
std::string_view to_string(Outcome o) noexcept;
std::optional<Outcome> parse_outcome(std::string_view s) noexcept;

struct AuditRecord {
    std::uint64_t seq = 0;
    Timestamp ts{};
    AuditCategory category = AuditCategory::Error;
    std::optional<std::string> correlation_id;
    std::string actor;
    std::string subject;
    Outcome outcome = Outcome::Ok;
    std::string detail;
    /// Attempt identity: a second record with the same key is not appended.
    std::optional<std::string> key;

    bool operator==(const AuditRecord&) const = default;
};

nlohmann::json to_json(const AuditRecord& r);
AuditRecord audit_record_from_json(const nlohmann::json& j);

/// Conjunctive filter; unset fields match everything. Time range is inclusive.
struct AuditFilter {
    std::optional<Timestamp> from;
    std::optional<Timestamp> to;
    std::optional<AuditCategory> category;
    std::optional<std::string> actor;
    std::optional<std::string> subject;
    std::optional<Outcome> outcome;
    std::optional<std::string> correlation_id;

    bool matches(const AuditRecord& r) const;
};

/// Totally ordered, gap-free traceability log. Sequence assignment and the
/// durable append happen under one lock, so a failed write never burns a seq.
class AuditLog {
public:
    AuditLog(std::unique_ptr<AppendLog> store, const Clock& clock);

    /// Returns the assigned seq once the record is durable. Throws StorageFailure.
    /// When `key` was already recorded the earlier seq is returned instead, so
    /// work retried after a crash is traced once.
    std::uint64_t record(AuditCategory category, std::optional<std::string> correlation, std::string actor,
                         std::string subject, Outcome outcome, std::string detail,
                         std::optional<std::string> key = std::nullopt);

    std::vector<AuditRecord> query(const AuditFilter& filter = {}) const;
    std::vector<AuditRecord> trace(const std::string& correlation_id) const;

    std::uint64_t high_water() const;
    bool healthy() const { return store_->healthy(); }
    AppendLog& store() { return *store_; }

private:
    std::unique_ptr<AppendLog> store_;
    const Clock& clock_;
    mutable std::shared_mutex mu_;
    std::vector<AuditRecord> records_;
    std::map<std::string, std::uint64_t, std::less<>> keyed_;
};

}  // namespace ssc
