// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "ssc/error.hpp"
#include "ssc/eventbus.hpp"

using namespace ssc;
using ssc::test::TempDir;
using ssc::test::World;

namespace {

struct Bus {
    World w;
    SimulatedAdministration pub = w.spawn("comune_a", {});
    EventBus bus;

    explicit Bus(std::unique_ptr<AppendLog> store = std::make_unique<AppendLog>(), std::size_t cap = 1000)
        : bus(std::move(store), w.keys, w.audit, w.clock, cap) {}

    Envelope event(const std::string& topic, const std::string& text) {
        auto e = build_envelope({pub.admin_id, "events"}, {pub.admin_id, topic}, Profile::AsyncEvent,
                                MessageKind::Event, {"text/plain", to_bytes(text)}, std::nullopt, w.clock);
        return sign_envelope(e, pub.keys.secret_key, pub.key_id, w.keys);
    }
};

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::NotFound;
}

std::vector<std::string> texts(const std::vector<DeliveredEvent>& events) {
    std::vector<std::string> out;
    for (const auto& d : events) out.push_back(d.envelope.payload_text());
    return out;
}

}  // namespace

TEST_SUITE("eventbus") {
    TEST_CASE("topic names and idempotent creation") {
        Bus b;
        CHECK(b.bus.create_topic("a.b").name == "a.b");
        CHECK(b.bus.create_topic("a.b").name == "a.b");
        CHECK(b.bus.topics().size() == 1);
        CHECK(code_of([&] { b.bus.create_topic("A B"); }) == ErrorCode::InvalidTopicName);
        CHECK_FALSE(valid_topic_name("a..b"));
        CHECK_FALSE(valid_topic_name(""));
        CHECK(valid_topic_name("school.enrollment_2.x"));
    }

    TEST_CASE("publish without subscribers succeeds") {
        Bus b;
        b.bus.create_topic("t");
        auto r = b.bus.publish(b.event("t", "x"), "t");
        CHECK(r.seq == 1);
        CHECK(r.global_seq == 1);
        CHECK_FALSE(r.duplicate);
    }

    TEST_CASE("publish checks topic, signature and profile") {
        Bus b;
        b.bus.create_topic("t");
        CHECK(code_of([&] { b.bus.publish(b.event("u", "x"), "u"); }) == ErrorCode::UnknownTopic);
        auto unsigned_e = b.event("t", "x");
        unsigned_e.security.reset();
        CHECK(code_of([&] { b.bus.publish(unsigned_e, "t"); }) == ErrorCode::VerificationFailed);
        auto sync = build_envelope({"comune_a", "p"}, {"comune_a", "t"}, Profile::Sync, MessageKind::Request,
                                   {"text/plain", {}}, std::nullopt, b.w.clock);
        sync = sign_envelope(sync, b.pub.keys.secret_key, b.pub.key_id, b.w.keys);
        CHECK(code_of([&] { b.bus.publish(sync, "t"); }) == ErrorCode::BadRequest);
    }

    TEST_CASE("subscription sees only later events, pull is at-least-once until ack") {
        Bus b;
        b.bus.create_topic("t");
        b.bus.publish(b.event("t", "before"), "t");
        auto sub = b.bus.subscribe({"comune_b", "inbox"}, "t", true);
        CHECK(b.bus.pull(sub.sub_id, 10).empty());
        for (auto s : {"1", "2", "3"}) b.bus.publish(b.event("t", s), "t");
        auto first = b.bus.pull(sub.sub_id, 10);
        CHECK(texts(first) == std::vector<std::string>{"1", "2", "3"});
        CHECK(texts(b.bus.pull(sub.sub_id, 2)) == std::vector<std::string>{"1", "2"});
        b.bus.ack(sub.sub_id, first[1].global_seq);
        CHECK(texts(b.bus.pull(sub.sub_id, 10)) == std::vector<std::string>{"3"});
        CHECK(code_of([&] { b.bus.ack(sub.sub_id, first[0].global_seq); }) == ErrorCode::CursorRegression);
        CHECK(code_of([&] { b.bus.ack(sub.sub_id, 999); }) == ErrorCode::CursorBeyondHead);
        CHECK(code_of([&] { b.bus.subscribe({"x", "y"}, "nope", true); }) == ErrorCode::UnknownTopic);
        CHECK(code_of([&] { b.bus.pull("missing", 1); }) == ErrorCode::UnknownSubscription);
    }

    TEST_CASE("ack zero on a fresh subscription is a no-op") {
        Bus b;
        b.bus.create_topic("t");
        auto sub = b.bus.subscribe({"comune_b", "inbox"}, "t", true);
        b.bus.ack(sub.sub_id, 0);
        CHECK(b.bus.subscription(sub.sub_id).cursor == 0);
    }

    TEST_CASE("1000 publishes by one publisher number 1..1000") {
        Bus b(std::make_unique<AppendLog>(), 5000);
        b.bus.create_topic("t");
        for (std::uint64_t i = 1; i <= 1000; ++i) CHECK(b.bus.publish(b.event("t", ""), "t").seq == i);
    }

    TEST_CASE("republishing an envelope returns the original receipt") {
        Bus b;
        b.bus.create_topic("t");
        auto sub = b.bus.subscribe({"comune_b", "inbox"}, "t", true);
        int heard = 0;
        b.bus.set_listener([&](const std::string&, const Envelope&) { ++heard; });
        auto e = b.event("t", "once");
        auto r1 = b.bus.publish(e, "t");
        auto r2 = b.bus.publish(e, "t");
        CHECK(r2.duplicate);
        CHECK(r2.global_seq == r1.global_seq);
        CHECK(b.bus.pull(sub.sub_id, 10).size() == 1);
        CHECK(heard == 2);
    }

    TEST_CASE("durable state survives a restart") {
        TempDir dir;
        std::string sub_id;
        std::uint64_t acked = 0;
        World w;
        auto pub = w.spawn("comune_a", {});
        auto make_event = [&](const std::string& text) {
            auto e = build_envelope({pub.admin_id, "events"}, {pub.admin_id, "t"}, Profile::AsyncEvent,
                                    MessageKind::Event, {"text/plain", to_bytes(text)}, std::nullopt, w.clock);
            return sign_envelope(e, pub.keys.secret_key, pub.key_id, w.keys);
        };
        {
            EventBus bus(std::make_unique<AppendLog>(dir / "events.ndjson"), w.keys, w.audit, w.clock);
            bus.create_topic("t");
            sub_id = bus.subscribe({"comune_b", "inbox"}, "t", true).sub_id;
            for (int i = 0; i < 5; ++i) bus.publish(make_event(std::to_string(i)), "t");
            acked = bus.pull(sub_id, 2).back().global_seq;
            bus.ack(sub_id, acked);
        }
        EventBus bus(std::make_unique<AppendLog>(dir / "events.ndjson"), w.keys, w.audit, w.clock);
        CHECK(bus.subscription(sub_id).cursor == acked);
        CHECK(texts(bus.pull(sub_id, 10)) == std::vector<std::string>{"2", "3", "4"});
        CHECK(bus.publish(make_event("5"), "t").seq == 6);
    }

    TEST_CASE("acknowledged events are trimmed, cap overflow is audited") {
        Bus b(std::make_unique<AppendLog>(), 3);
        b.bus.create_topic("t");
        auto sub = b.bus.subscribe({"comune_b", "inbox"}, "t", true);
        for (int i = 0; i < 3; ++i) b.bus.publish(b.event("t", std::to_string(i)), "t");
        b.bus.ack(sub.sub_id, b.bus.pull(sub.sub_id, 10)[1].global_seq);
        CHECK(b.bus.retained("t") == 1);
        for (int i = 3; i < 6; ++i) b.bus.publish(b.event("t", std::to_string(i)), "t");
        CHECK(b.bus.retained("t") == 3);
        AuditFilter f;
        f.category = AuditCategory::Error;
        CHECK(b.w.audit.query(f).size() == 1);
        CHECK(texts(b.bus.pull(sub.sub_id, 10)) == std::vector<std::string>{"3", "4", "5"});
    }
}
