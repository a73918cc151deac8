// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "ssc/error.hpp"
#include "ssc/registry.hpp"

using namespace ssc;
using ssc::test::TempDir;

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

Registry::BindingCheck only_ports(std::set<Destination> known) {
    return [known](const Binding& b) {
        if (const auto* p = std::get_if<SyncPortBinding>(&b)) return known.contains(p->port);
        return true;
    };
}

ServiceDescriptor service(const std::string& id, const std::string& provider, std::set<std::string> events,
                          UsageTarget target = UsageTarget::Citizen) {
    ServiceDescriptor d;
    d.service_id = id;
    d.provider_admin_id = provider;
    d.title = "title of " + id;
    d.life_events = std::move(events);
    d.usage_target = target;
    d.min_auth_level = AuthLevel::Weak;
    d.binding = EventTopicBinding{"t." + id};
    return d;
}

std::vector<std::string> ids(const std::vector<ServiceDescriptor>& v) {
    std::vector<std::string> out;
    for (const auto& d : v) out.push_back(d.service_id);
    return out;
}

}  // namespace

TEST_SUITE("registry") {
    TEST_CASE("taxonomy building") {
        Registry r(std::make_unique<AppendLog>(), only_ports({}));
        CHECK(r.list_taxonomy().empty());
        auto root = r.add_life_event("moving", "Moving house");
        CHECK_FALSE(root.parent);
        CHECK(code_of([&] { r.add_life_event("x", "X", "missing"); }) == ErrorCode::UnknownParent);
        CHECK(code_of([&] { r.add_life_event("moving", "again"); }) == ErrorCode::DuplicateNode);
        CHECK(code_of([&] { r.add_life_event("self", "S", "self"); }) == ErrorCode::CycleDetected);
        r.add_life_event("residence", "Residence", "moving");
        r.add_life_event("abroad", "Abroad", "moving");
        r.add_life_event("birth", "Birth");
        auto tax = r.list_taxonomy();
        std::vector<std::string> order;
        for (const auto& n : tax) order.push_back(n.node_id);
        CHECK(order == std::vector<std::string>{"birth", "moving", "abroad", "residence"});
        CHECK(tax[3].parent == "moving");
        CHECK(r.list_taxonomy() == tax);
        CHECK(r.ensure_life_event("residence", "Residence", "moving").node_id == "residence");
        CHECK(code_of([&] { r.ensure_life_event("residence", "R", "birth"); }) == ErrorCode::DuplicateNode);
    }

    TEST_CASE("register and discover services") {
        Registry r(std::make_unique<AppendLog>(), only_ports({{"comune_a", "anagrafe"}}));
        r.add_life_event("moving", "Moving");
        r.add_life_event("residence", "Residence", "moving");
        auto d = service("cert", "comune_a", {"residence"});
        d.binding = SyncPortBinding{{"comune_a", "anagrafe"}};
        r.register_service(d);
        CHECK(r.get_descriptor("cert") == d);
        CHECK(ids(r.find_by_life_event("moving")) == std::vector<std::string>{"cert"});
        CHECK(r.find_by_life_event("moving", UsageTarget::Business).empty());
        CHECK(code_of([&] { r.register_service(d); }) == ErrorCode::DuplicateService);
        CHECK(code_of([&] { r.register_service(service("x", "a", {"nowhere"})); }) == ErrorCode::UnknownLifeEvent);
        auto dangling = service("y", "a", {"moving"});
        dangling.binding = SyncPortBinding{{"comune_z", "none"}};
        CHECK(code_of([&] { r.register_service(dangling); }) == ErrorCode::UnknownBinding);
        CHECK(code_of([&] { r.get_descriptor("nope"); }) == ErrorCode::UnknownService);
        CHECK(code_of([&] { r.find_by_life_event("nope"); }) == ErrorCode::UnknownLifeEvent);
    }

    TEST_CASE("descriptor JSON round trip") {
        auto d = service("s", "p", {"a", "b"}, UsageTarget::Administration);
        d.binding = ProcessBinding{"model"};
        CHECK(service_descriptor_from_json(to_json(d)) == d);
        auto j = to_json(d);
        j["binding"] = {{"type", "carrier_pigeon"}};
        CHECK(code_of([&] { service_descriptor_from_json(j); }) == ErrorCode::BadRequest);
    }

    TEST_CASE("catalog survives a restart") {
        TempDir dir;
        {
            Registry r(std::make_unique<AppendLog>(dir / "catalog.ndjson"), only_ports({}));
            r.add_life_event("moving", "Moving");
            r.add_life_event("residence", "Residence", "moving");
            r.register_service(service("s", "p", {"residence"}));
        }
        Registry r(std::make_unique<AppendLog>(dir / "catalog.ndjson"), only_ports({}));
        CHECK(r.list_taxonomy().size() == 2);
        CHECK(ids(r.find_by_life_event("moving")) == std::vector<std::string>{"s"});
    }

    TEST_CASE("three-level taxonomy matches a brute-force walk") {
        Registry r(std::make_unique<AppendLog>(), only_ports({}));
        std::map<std::string, std::optional<std::string>> parent{
            {"l0", std::nullopt}, {"l1a", "l0"}, {"l1b", "l0"}, {"l2a", "l1a"}, {"l2b", "l1b"}, {"other", std::nullopt}};
        for (auto n : {"l0", "l1a", "l1b", "l2a", "l2b", "other"}) r.add_life_event(n, n, parent[n]);
        r.register_service(service("s0", "b", {"l0"}));
        r.register_service(service("s1", "a", {"l1b"}, UsageTarget::Business));
        r.register_service(service("s2", "a", {"l2a", "other"}));
        r.register_service(service("s3", "c", {"other"}));
        auto under = [&](std::string node, const std::string& root) {
            for (std::optional<std::string> cur = node; cur; cur = parent[*cur])
                if (*cur == root) return true;
            return false;
        };
        for (const auto& [root, p] : parent) {
            std::vector<std::pair<std::string, std::string>> expected;
            for (const auto& d : r.services()) {
                bool hit = false;
                for (const auto& n : d.life_events) hit = hit || under(n, root);
                if (hit) expected.emplace_back(d.provider_admin_id, d.service_id);
            }
            std::sort(expected.begin(), expected.end());
            std::vector<std::pair<std::string, std::string>> got;
            for (const auto& d : r.find_by_life_event(root)) got.emplace_back(d.provider_admin_id, d.service_id);
            CHECK(got == expected);
        }
        CHECK(ids(r.find_by_life_event("l0")) == std::vector<std::string>{"s1", "s2", "s0"});
    }
}
