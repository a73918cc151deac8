// SPDX-License-Identifier: Apache-2.0
#include "ssc/audit.hpp"

#include "ssc/error.hpp"

#include <mutex>

namespace ssc {

namespace {

constexpr std::pair<AuditCategory, std::string_view> kCategories[] = {
    {AuditCategory::ExchangeRequest, "exchange_request"},
    {AuditCategory::ExchangeResponse, "exchange_response"},
    {AuditCategory::Publish, "publish"},
    {AuditCategory::Deliver, "deliver"},
    {AuditCategory::OrchestrationTransition, "orchestration_transition"},
    {AuditCategory::TaskEvent, "task_event"},
    {AuditCategory::AuthEvent, "auth_event"},
    {AuditCategory::Error, "error"},
};

}  // namespace

std::string_view to_string(AuditCategory c) noexcept {
    for (const auto& [cat, name] : kCategories)
        if (cat == c) return name;
    return "error";
}

std::optional<AuditCategory> parse_audit_category(std::string_view s) noexcept {
    for (const auto& [cat, name] : kCategories)
        if (name == s) return cat;
    return std::nullopt;
}

std::string_view to_string(Outcome o) noexcept { return o == Outcome::Ok ? "ok" : "fault"; }

std::optional<Outcome> parse_outcome(std::string_view s) noexcept {
    if (s == "ok") return Outcome::Ok;
    if (s == "fault") return Outcome::Fault;
    return std::nullopt;
}

nlohmann::json to_json(const AuditRecord& r) {
    nlohmann::json j{{"seq", r.seq},
            {"ts", format_timestamp(r.ts)},
            {"category", to_string(r.category)},
            {"correlation_id", r.correlation_id ? nlohmann::json(*r.correlation_id) : nlohmann::json(nullptr)},
            {"actor", r.actor},
            {"subject", r.subject},
            {"outcome", to_string(r.outcome)},
            {"detail", r.detail}};
    if (r.key) j["key"] = *r.key;
    return j;
}

AuditRecord audit_record_from_json(const nlohmann::json& j) {
    AuditRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    auto ts = parse_timestamp(j.at("ts").get<std::string>());
    if (!ts) fail(ErrorCode::StorageCorrupt, "bad audit timestamp");
    r.ts = *ts;
    auto cat = parse_audit_category(j.at("category").get<std::string>());
    if (!cat) fail(ErrorCode::StorageCorrupt, "bad audit category");
    r.category = *cat;
    if (const auto& c = j.at("correlation_id"); !c.is_null()) r.correlation_id = c.get<std::string>();
    r.actor = j.at("actor").get<std::string>();
    r.subject = j.at("subject").get<std::string>();
    auto out = parse_outcome(j.at("outcome").get<std::string>());
    if (!out) fail(ErrorCode::StorageCorrupt, "bad audit outcome");
    r.outcome = *out;
    r.detail = j.at("detail").get<std::string>();
    if (auto k = j.find("key"); k != j.end() && k->is_string()) r.key = k->get<std::string>();
    return r;
}

bool AuditFilter::matches(const AuditRecord& r) const {
    if (from && r.ts < *from) return false;
    if (to && r.ts > *to) return false;
    if (category && r.category != *category) return false;
    if (actor && r.actor != *actor) return false;
    if (subject && r.subject != *subject) return false;
    if (outcome && r.outcome != *outcome) return false;
    if (correlation_id && r.correlation_id != *correlation_id) return false;
    return true;
}

AuditLog::AuditLog(std::unique_ptr<AppendLog> store, const Clock& clock) : store_(std::move(store)), clock_(clock) {
    store_->replay([this](const nlohmann::json& j, std::size_t) {
        auto r = audit_record_from_json(j);
        const auto expected = records_.size() + 1;
        if (r.seq != expected)
            fail(ErrorCode::StorageCorrupt, "audit seq " + std::to_string(r.seq) + " where " +
                                                std::to_string(expected) + " was expected");
        if (r.key) keyed_.emplace(*r.key, r.seq);
        records_.push_back(std::move(r));
    });
}

std::uint64_t AuditLog::record(AuditCategory category, std::optional<std::string> correlation, std::string actor,
                               std::string subject, Outcome outcome, std::string detail,
                               std::optional<std::string> key) {
    std::unique_lock lock(mu_);
    if (key)
        if (auto it = keyed_.find(*key); it != keyed_.end()) return it->second;
    AuditRecord r{records_.size() + 1,
                  clock_.now(),
                  category,
                  std::move(correlation),
                  std::move(actor),
                  std::move(subject),
                  outcome,
                  std::move(detail),
                  std::move(key)};
    store_->append(to_json(r));
    if (r.key) keyed_.emplace(*r.key, r.seq);
    records_.push_back(std::move(r));
    return records_.back().seq;
}

std::vector<AuditRecord> AuditLog::query(const AuditFilter& filter) const {
    std::shared_lock lock(mu_);
    std::vector<AuditRecord> out;
    for (const auto& r : records_)
        if (filter.matches(r)) out.push_back(r);
    return out;
}

std::vector<AuditRecord> AuditLog::trace(const std::string& correlation_id) const {
    AuditFilter f;
    f.correlation_id = correlation_id;
    return query(f);
}

std::uint64_t AuditLog::high_water() const {
    std::shared_lock lock(mu_);
    return records_.size();
}

}  // namespace ssc
