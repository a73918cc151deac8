// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "ssc/error.hpp"

using namespace ssc;
using ssc::test::World;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::NotFound;
}

std::size_t records_for(const AuditLog& audit, const std::string& correlation) {
    return audit.trace(correlation).size();
}

}  // namespace

TEST_SUITE("cooperation") {
    TEST_CASE("port lifecycle and routing") {
        ManualClock clock;
        PortTable ports(clock);
        ports.register_port("comuneA", "anagrafe", "inproc://h1");
        CHECK(ports.resolve({"comuneA", "anagrafe"}) == "inproc://h1");
        CHECK(code_of([&] { ports.register_port("comuneA", "anagrafe", "inproc://h2"); }) == ErrorCode::DuplicatePort);
        CHECK(code_of([&] { ports.resolve({"comuneA", "tributi"}); }) == ErrorCode::NoRoute);
        ports.deregister_port("comuneA", "anagrafe");
        CHECK(code_of([&] { ports.resolve({"comuneA", "anagrafe"}); }) == ErrorCode::NoRoute);
        CHECK(code_of([&] { ports.deregister_port("comuneA", "tributi"); }) == ErrorCode::UnknownPort);
        ports.register_port("comuneA", "anagrafe", "inproc://h3");
        CHECK(ports.resolve({"comuneA", "anagrafe"}) == "inproc://h3");
        CHECK(ports.online_admins() == std::vector<std::string>{"comuneA"});
    }

    TEST_CASE("echo exchange correlates and is audited") {
        World w;
        auto a = w.spawn("comune_a", {{"front", {}}});
        w.spawn("comune_b", {{"echo", {}}});
        auto req = w.request(a, {"comune_b", "echo"}, "ping");
        auto resp = w.coop.exchange_sync(req);
        CHECK(resp.message_kind == MessageKind::Response);
        CHECK(resp.correlation_id == req.envelope_id);
        CHECK(resp.payload_text() == "ping");
        CHECK(resp.sender.admin_id == "comune_b");
        CHECK(verify_envelope(resp, w.keys).valid);
        auto trace = w.audit.trace(req.envelope_id);
        REQUIRE(trace.size() == 2);
        CHECK(trace[0].category == AuditCategory::ExchangeRequest);
        CHECK(trace[1].category == AuditCategory::ExchangeResponse);
        CHECK(trace[1].outcome == Outcome::Ok);
    }

    TEST_CASE("tampered request never reaches the backend") {
        World w;
        auto a = w.spawn("comune_a", {{"front", {}}});
        w.spawn("comune_b", {{"boom", {HandlerKind::Fault, "should not run", Millis{0}}}});
        auto req = w.request(a, {"comune_b", "boom"}, "ping");
        req.body.payload[0] ^= 1;
        auto resp = w.coop.exchange_sync(req);
        REQUIRE(resp.message_kind == MessageKind::Fault);
        CHECK(fault_info(resp)->code == FaultCode::VerificationFailed);
        CHECK(resp.sender.admin_id == "ssc");
        CHECK(verify_envelope(resp, w.keys).valid);
        auto trace = w.audit.trace(req.envelope_id);
        REQUIRE(trace.size() == 2);
        CHECK(trace[1].detail.find("should not run") == std::string::npos);
    }

    TEST_CASE("no route, backend fault and timeout become fault envelopes") {
        World w;
        auto a = w.spawn("comune_a", {{"front", {}}});
        w.spawn("comune_b", {{"boom", {HandlerKind::Fault, "disk on fire", Millis{0}}},
                             {"slow", {HandlerKind::Echo, "", Millis{400}}}});

        auto r1 = w.request(a, {"comune_x", "none"}, "1");
        CHECK(fault_info(w.coop.exchange_sync(r1))->code == FaultCode::NoRoute);
        CHECK(records_for(w.audit, r1.envelope_id) == 2);

        auto r2 = w.request(a, {"comune_b", "boom"}, "2");
        auto f2 = w.coop.exchange_sync(r2);
        CHECK(fault_info(f2)->code == FaultCode::BackendFault);
        CHECK(f2.correlation_id == r2.envelope_id);
        CHECK(records_for(w.audit, r2.envelope_id) == 2);

        auto r3 = w.request(a, {"comune_b", "slow"}, "3");
        const auto t0 = std::chrono::steady_clock::now();
        auto f3 = w.coop.exchange_sync(r3, Millis{100});
        const auto elapsed = std::chrono::steady_clock::now() - t0;
        CHECK(fault_info(f3)->code == FaultCode::Timeout);
        CHECK(elapsed < Millis{200});
        CHECK(records_for(w.audit, r3.envelope_id) == 2);

        w.coop.deregister_applicative_port("comune_b", "boom");
        auto r4 = w.request(a, {"comune_b", "boom"}, "4");
        CHECK(fault_info(w.coop.exchange_sync(r4))->code == FaultCode::NoRoute);
    }

    TEST_CASE("teardown waits for a backend that outlived its timeout") {
        const auto t0 = std::chrono::steady_clock::now();
        {
            World w;
            auto a = w.spawn("comune_a", {{"slow", {HandlerKind::Echo, "", Millis{300}}}});
            auto reply = w.coop.exchange_sync(w.request(a, {"comune_a", "slow"}, "x"), Millis{20});
            CHECK(fault_info(reply)->code == FaultCode::Timeout);
        }
        CHECK(std::chrono::steady_clock::now() - t0 >= Millis{300});
    }

    TEST_CASE("audit failure surfaces as a storage fault") {
        World w;
        auto a = w.spawn("comune_a", {{"echo", {}}});
        w.audit.store().inject_failure(true);
        auto resp = w.coop.exchange_sync(w.request(a, {"comune_a", "echo"}, "x"));
        REQUIRE(resp.message_kind == MessageKind::Fault);
        CHECK(fault_info(resp)->code == FaultCode::StorageFailure);
    }

    TEST_CASE("template handler substitutes request, admin and service") {
        World w;
        auto a = w.spawn("comune_a", {{"cert", {HandlerKind::Template, "${service} for ${request} by ${admin}", {}}}});
        auto resp = w.coop.exchange_sync(w.request(a, {"comune_a", "cert"}, "RSS"));
        CHECK(resp.payload_text() == "cert for RSS by comune_a");
    }
}
