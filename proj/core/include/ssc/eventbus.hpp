// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ssc/audit.hpp"
#include "ssc/envelope.hpp"
#include "ssc/storage.hpp"

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

namespace ssc {

struct Topic {
    std::string name;
    Timestamp created_at{};
};

/// `[a-z0-9_]+(\.[a-z0-9_]+)*`
bool valid_topic_name(std::string_view name) noexcept;

struct Subscriber {
    std::string admin_id;
    std::string port_id;
};

struct Subscription {
    std::string sub_id;
    Subscriber subscriber;
    std::string topic;
    bool durable = true;
    /// Highest global_seq explicitly acknowledged.
    std::uint64_t cursor = 0;
    /// Topic head at creation; earlier events are never delivered here.
    std::uint64_t start_seq = 0;
};

struct PublicationReceipt {
    std::string topic;
    std::string publisher;
    std::uint64_t seq = 0;
    std::uint64_t global_seq = 0;
    /// Same envelope_id was already published; the original receipt is returned.
    bool duplicate = false;
};

struct DeliveredEvent {
    std::uint64_t global_seq = 0;
    Envelope envelope;
};

/// Pull-based publish & subscribe with explicit acknowledgement (at-least-once).
/// Publishing never depends on subscribers: the event is stored and the receipt
/// returned whether zero or many subscribers exist, online or not.
class EventBus {
public:
    static constexpr std::size_t kDefaultRetentionCap = 100'000;

    EventBus(std::unique_ptr<AppendLog> store, const KeyDirectory& keys, AuditLog& audit, const Clock& clock,
             std::size_t retention_cap = kDefaultRetentionCap);

    /// Idempotent.
    Topic create_topic(const std::string& name);
    bool has_topic(const std::string& name) const;
    std::vector<Topic> topics() const;

    Subscription subscribe(const Subscriber& subscriber, const std::string& topic, bool durable);
    Subscription subscription(const std::string& sub_id) const;
    std::vector<Subscription> subscriptions() const;

    /// Durable (and audited) before returning. Re-publishing an envelope_id
    /// returns the original receipt without storing a second copy.
    PublicationReceipt publish(const Envelope& event, const std::string& topic);

    std::vector<DeliveredEvent> pull(const std::string& sub_id, std::size_t max);
    void ack(const std::string& sub_id, std::uint64_t up_to_global_seq);

    /// Invoked after every publication is committed, and again for duplicates.
    void set_listener(std::function<void(const std::string& topic, const Envelope&)> listener);

    std::uint64_t publications() const;
    std::size_t retained(const std::string& topic) const;
    bool healthy() const { return store_->healthy(); }

private:
    struct StoredEvent {
        std::uint64_t global_seq;
        std::string publisher;
        std::uint64_t seq;
        Envelope envelope;
    };
    struct SubState;
    struct TopicState {
        Topic topic;
        /// Guards everything below plus the cursors of this topic's subscriptions.
        mutable std::shared_mutex mu;
        std::uint64_t head = 0;
        std::map<std::string, std::uint64_t> publisher_seq;
        std::map<std::string, PublicationReceipt> by_envelope;
        std::deque<StoredEvent> events;
        std::vector<const SubState*> subs;
    };
    struct SubState {
        Subscription sub;
    };

    TopicState& topic_state(const std::string& name) const;
    SubState& sub_state(const std::string& sub_id) const;
    std::uint64_t floor_of(const Subscription& s) const { return std::max(s.cursor, s.start_seq); }
    /// Caller holds ts.mu exclusively.
    void trim(TopicState& ts, bool audit_evictions);
    void load();

    std::unique_ptr<AppendLog> store_;
    const KeyDirectory& keys_;
    AuditLog& audit_;
    const Clock& clock_;
    std::size_t retention_cap_;

    mutable std::shared_mutex mu_;
    std::map<std::string, std::unique_ptr<TopicState>> topics_;
    std::map<std::string, std::unique_ptr<SubState>> subs_;
    std::function<void(const std::string&, const Envelope&)> listener_;
    std::atomic<std::uint64_t> publications_{0};
};

}  // namespace ssc
