// SPDX-License-Identifier: Apache-2.0
#include "ssc/eventbus.hpp"

#include "ssc/error.hpp"

#include <algorithm>

namespace ssc {

using nlohmann::json;

bool valid_topic_name(std::string_view name) noexcept {
    if (name.empty() || name.front() == '.' || name.back() == '.') return false;
    char prev = '.';
    for (char c : name) {
        const bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!word && c != '.') return false;
        if (c == '.' && prev == '.') return false;
        prev = c;
    }
    return true;
}

EventBus::EventBus(std::unique_ptr<AppendLog> store, const KeyDirectory& keys, AuditLog& audit, const Clock& clock,
                   std::size_t retention_cap)
    : store_(std::move(store)), keys_(keys), audit_(audit), clock_(clock), retention_cap_(retention_cap) {
    load();
}

void EventBus::load() {
    store_->replay([this](const json& j, std::size_t) {
        const auto type = j.at("t").get<std::string>();
        if (type == "topic") {
            const auto name = j.at("name").get<std::string>();
            auto ts = std::make_unique<TopicState>();
            ts->topic = {name, from_epoch_ms(j.at("created_at").get<std::int64_t>())};
            topics_.emplace(name, std::move(ts));
        } else if (type == "sub") {
            auto ss = std::make_unique<SubState>();
            ss->sub.sub_id = j.at("sub_id").get<std::string>();
            ss->sub.subscriber = {j.at("admin_id").get<std::string>(), j.at("port_id").get<std::string>()};
            ss->sub.topic = j.at("topic").get<std::string>();
            ss->sub.durable = true;
            ss->sub.start_seq = j.at("start_seq").get<std::uint64_t>();
            topics_.at(ss->sub.topic)->subs.push_back(ss.get());
            subs_.emplace(ss->sub.sub_id, std::move(ss));
        } else if (type == "pub") {
            auto& ts = *topics_.at(j.at("topic").get<std::string>());
            StoredEvent ev{j.at("global_seq").get<std::uint64_t>(), j.at("publisher").get<std::string>(),
                           j.at("seq").get<std::uint64_t>(), parse_envelope(j.at("envelope").get<std::string>())};
            if (ev.global_seq != ts.head + 1) fail(ErrorCode::StorageCorrupt, "event global_seq out of order");
            ts.head = ev.global_seq;
            ts.publisher_seq[ev.publisher] = ev.seq;
            ts.by_envelope[ev.envelope.envelope_id] = {ts.topic.name, ev.publisher, ev.seq, ev.global_seq, true};
            ts.events.push_back(std::move(ev));
            ++publications_;
        } else if (type == "ack") {
            auto it = subs_.find(j.at("sub_id").get<std::string>());
            if (it != subs_.end()) it->second->sub.cursor = j.at("up_to").get<std::uint64_t>();
        } else {
            fail(ErrorCode::StorageCorrupt, "unknown event log record type '" + type + "'");
        }
    });
    for (auto& [name, ts] : topics_) trim(*ts, false);
}

EventBus::TopicState& EventBus::topic_state(const std::string& name) const {
    std::shared_lock lock(mu_);
    auto it = topics_.find(name);
    if (it == topics_.end()) fail(ErrorCode::UnknownTopic, name);
    return *it->second;
}

EventBus::SubState& EventBus::sub_state(const std::string& sub_id) const {
    std::shared_lock lock(mu_);
    auto it = subs_.find(sub_id);
    if (it == subs_.end()) fail(ErrorCode::UnknownSubscription, sub_id);
    return *it->second;
}

Topic EventBus::create_topic(const std::string& name) {
    if (!valid_topic_name(name)) fail(ErrorCode::InvalidTopicName, name);
    std::unique_lock lock(mu_);
    if (auto it = topics_.find(name); it != topics_.end()) return it->second->topic;
    auto ts = std::make_unique<TopicState>();
    ts->topic = {name, clock_.now()};
    store_->append({{"t", "topic"}, {"name", name}, {"created_at", to_epoch_ms(ts->topic.created_at)}});
    auto topic = ts->topic;
    topics_.emplace(name, std::move(ts));
    return topic;
}

bool EventBus::has_topic(const std::string& name) const {
    std::shared_lock lock(mu_);
    return topics_.contains(name);
}

std::vector<Topic> EventBus::topics() const {
    std::shared_lock lock(mu_);
    std::vector<Topic> out;
    for (const auto& [name, ts] : topics_) out.push_back(ts->topic);
    return out;
}

Subscription EventBus::subscribe(const Subscriber& subscriber, const std::string& topic, bool durable) {
    if (subscriber.admin_id.empty() || subscriber.port_id.empty())
        fail(ErrorCode::InvalidAddress, "empty subscriber identifier");
    std::unique_lock lock(mu_);
    auto it = topics_.find(topic);
    if (it == topics_.end()) fail(ErrorCode::UnknownTopic, topic);
    auto& ts = *it->second;
    std::unique_lock tlock(ts.mu);
    auto ss = std::make_unique<SubState>();
    ss->sub = {new_uuid(), subscriber, topic, durable, 0, ts.head};
    if (durable)
        store_->append({{"t", "sub"},
                        {"sub_id", ss->sub.sub_id},
                        {"admin_id", subscriber.admin_id},
                        {"port_id", subscriber.port_id},
                        {"topic", topic},
                        {"start_seq", ss->sub.start_seq}});
    ts.subs.push_back(ss.get());
    auto sub = ss->sub;
    subs_.emplace(sub.sub_id, std::move(ss));
    return sub;
}

Subscription EventBus::subscription(const std::string& sub_id) const {
    auto& ss = sub_state(sub_id);
    auto& ts = topic_state(ss.sub.topic);
    std::shared_lock lock(ts.mu);
    return ss.sub;
}

std::vector<Subscription> EventBus::subscriptions() const {
    std::vector<std::string> ids;
    {
        std::shared_lock lock(mu_);
        for (const auto& [id, ss] : subs_) ids.push_back(id);
    }
    std::vector<Subscription> out;
    for (const auto& id : ids) out.push_back(subscription(id));
    return out;
}

PublicationReceipt EventBus::publish(const Envelope& event, const std::string& topic) {
    if (event.message_kind != MessageKind::Event || event.profile != Profile::AsyncEvent)
        fail(ErrorCode::BadRequest, "publish needs an async_event envelope of kind event");
    if (auto report = verify_envelope(event, keys_); !report.valid)
        fail(ErrorCode::VerificationFailed, std::string(to_string(report.reason)));

    auto& ts = topic_state(topic);
    PublicationReceipt receipt;
    {
        std::unique_lock lock(ts.mu);
        if (auto dup = ts.by_envelope.find(event.envelope_id); dup != ts.by_envelope.end()) {
            receipt = dup->second;
            receipt.duplicate = true;
        } else {
            const auto& publisher = event.sender.admin_id;
            receipt = {topic, publisher, ts.publisher_seq[publisher] + 1, ts.head + 1, false};

            audit_.record(AuditCategory::Publish, event.correlation_id, publisher, topic, Outcome::Ok,
                          "global_seq " + std::to_string(receipt.global_seq) + " seq " + std::to_string(receipt.seq) +
                              " envelope " + event.envelope_id,
                          "publish/" + topic + "/" + event.envelope_id);
            store_->append({{"t", "pub"},
                            {"topic", topic},
                            {"global_seq", receipt.global_seq},
                            {"seq", receipt.seq},
                            {"publisher", publisher},
                            {"envelope", serialize_envelope(event)}});

            ts.head = receipt.global_seq;
            ts.publisher_seq[publisher] = receipt.seq;
            ts.by_envelope[event.envelope_id] = receipt;
            ts.events.push_back({receipt.global_seq, publisher, receipt.seq, event});
            ++publications_;
            trim(ts, true);
        }
    }

    // Duplicates are handed on too: consumers are idempotent per envelope, and
    // a retried publish must still reach a consumer that missed the first one.
    std::function<void(const std::string&, const Envelope&)> listener;
    {
        std::shared_lock lock(mu_);
        listener = listener_;
    }
    if (listener) listener(topic, event);
    return receipt;
}

std::vector<DeliveredEvent> EventBus::pull(const std::string& sub_id, std::size_t max) {
    auto& ss = sub_state(sub_id);
    auto& ts = topic_state(ss.sub.topic);
    std::vector<DeliveredEvent> out;
    {
        std::shared_lock lock(ts.mu);
        const auto floor = floor_of(ss.sub);
        auto it = std::upper_bound(ts.events.begin(), ts.events.end(), floor,
                                   [](std::uint64_t v, const StoredEvent& e) { return v < e.global_seq; });
        for (; it != ts.events.end() && out.size() < max; ++it) out.push_back({it->global_seq, it->envelope});
    }
    if (!out.empty())
        audit_.record(AuditCategory::Deliver, std::nullopt, ss.sub.subscriber.admin_id, ss.sub.topic, Outcome::Ok,
                      "subscription " + sub_id + " global_seq " + std::to_string(out.front().global_seq) + ".." +
                          std::to_string(out.back().global_seq));
    return out;
}

void EventBus::ack(const std::string& sub_id, std::uint64_t up_to) {
    auto& ss = sub_state(sub_id);
    auto& ts = topic_state(ss.sub.topic);
    std::unique_lock lock(ts.mu);
    if (up_to < ss.sub.cursor)
        fail(ErrorCode::CursorRegression,
             "ack " + std::to_string(up_to) + " below cursor " + std::to_string(ss.sub.cursor));
    if (up_to > ts.head)
        fail(ErrorCode::CursorBeyondHead, "ack " + std::to_string(up_to) + " beyond head " + std::to_string(ts.head));
    if (up_to == ss.sub.cursor) return;
    if (ss.sub.durable) store_->append({{"t", "ack"}, {"sub_id", sub_id}, {"up_to", up_to}});
    ss.sub.cursor = up_to;
    trim(ts, true);
}

void EventBus::trim(TopicState& ts, bool audit_evictions) {
    std::uint64_t keep_after = ts.head;
    for (const auto* ss : ts.subs) keep_after = std::min(keep_after, floor_of(ss->sub));
    while (!ts.events.empty() && ts.events.front().global_seq <= keep_after) ts.events.pop_front();
    while (ts.events.size() > retention_cap_) {
        const auto& victim = ts.events.front();
        if (audit_evictions)
            audit_.record(AuditCategory::Error, victim.envelope.correlation_id, victim.publisher, ts.topic.name,
                          Outcome::Fault, "retention cap evicted global_seq " + std::to_string(victim.global_seq));
        ts.events.pop_front();
    }
}

void EventBus::set_listener(std::function<void(const std::string&, const Envelope&)> listener) {
    std::unique_lock lock(mu_);
    listener_ = std::move(listener);
}

std::uint64_t EventBus::publications() const { return publications_.load(); }

std::size_t EventBus::retained(const std::string& topic) const {
    auto& ts = topic_state(topic);
    std::shared_lock lock(ts.mu);
    return ts.events.size();
}

}  // namespace ssc
