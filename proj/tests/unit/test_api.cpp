// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "ssc/api.hpp"
#include "ssc/gateway.hpp"
#include "ssc/http.hpp"
#include "ssc/scenario.hpp"

using namespace ssc;
using nlohmann::json;

namespace {

const std::filesystem::path kScenarios = SSC_SCENARIO_DIR;

GatewayConfig api_config() {
    GatewayConfig c;
    c.framework_key_seed = "api-test";
    c.password_params = PasswordHashParams::minimum();
    return c;
}

/// Gateway seeded with the residence-change scenario, driven in-process.
struct Api {
    Scenario scenario = load_scenario(kScenarios / "residence-change.json");
    Gateway gw{api_config()};
    ApiRouter router{gw, {"http://portal-a.example", "http://portal-b.example"}};
    InProcessClient client{router};

    Api() { seed_scenario(gw, scenario); }

    std::string login(const std::string& user, const std::string& password) {
        auto r = client.request("POST", "/auth/login", json{{"user_id", user}, {"password", password}});
        REQUIRE(r.status == 200);
        return r.json().at("token").get<std::string>();
    }
};

}  // namespace

TEST_SUITE("api") {
    TEST_CASE("health and unknown routes") {
        Api api;
        auto h = api.client.request("GET", "/health");
        CHECK(h.status == 200);
        CHECK(h.json()["status"] == "ok");
        auto missing = api.client.request("GET", "/nowhere");
        CHECK(missing.status == 404);
        CHECK(missing.json()["error"] == "NotFound");
        auto bad = api.client.post_raw("/exchange", "{truncated");
        CHECK(bad.status == 400);
        CHECK(bad.json()["error"] == "MalformedEnvelope");
    }

    TEST_CASE("catalog endpoints") {
        Api api;
        auto tax = api.client.request("GET", "/taxonomy").json();
        CHECK(tax.size() == 4);
        auto moving = api.client.request("GET", "/services", std::nullopt, "", {{"life_event", "moving"}}).json();
        CHECK(moving.size() == 2);
        auto admin_only = api.client.request("GET", "/services", std::nullopt, "", {{"target", "administration"}}).json();
        REQUIRE(admin_only.size() == 1);
        CHECK(admin_only[0]["service_id"] == "school.transfer-notice");
        CHECK(api.client.request("GET", "/services/nope").status == 404);
    }

    TEST_CASE("invoke enforces authentication level") {
        Api api;
        auto r = api.client.request("POST", "/services/anagrafe.certificate/invoke", json{{"payload", "X"}});
        CHECK(r.status == 401);
        CHECK(r.json()["reason"] == "missing");
        const auto token = api.login("mario.rossi", "correct-horse-42");
        r = api.client.request("POST", "/services/anagrafe.certificate/invoke", json{{"payload", "X"}}, token);
        CHECK(r.status == 200);
        CHECK(r.json()["kind"] == "response");
        CHECK(r.json()["payload"] == "residence certificate for X issued by comune_old");
        r = api.client.request("POST", "/services/school.transfer-notice/invoke", json{{"payload", "X"}}, token);
        CHECK(r.status == 403);
        CHECK(r.json()["reason"] == "level");
        r = api.client.request("POST", "/services/anagrafe.certificate/invoke", json{{"payload", "X"}}, token + "x");
        CHECK(r.status == 401);
        CHECK(r.json()["reason"] == "invalid");
    }

    TEST_CASE("self-registration, login and profile") {
        Api api;
        auto r = api.client.request("POST", "/auth/register",
                                    json{{"user_id", "new.user"}, {"password", "long-enough"}, {"roles", {"admin"}}});
        CHECK(r.status == 403);
        r = api.client.request("POST", "/auth/register",
                               json{{"user_id", "new.user"}, {"password", "long-enough"},
                                    {"static_profile", {{"full_name", "New User"}}}});
        CHECK(r.status == 201);
        CHECK(r.body.find("long-enough") == std::string::npos);
        CHECK(api.client.request("POST", "/auth/register", json{{"user_id", "new.user"}, {"password", "long-enough"}})
                  .status == 409);
        CHECK(api.client.request("POST", "/auth/login", json{{"user_id", "new.user"}, {"password", "nope-nope"}})
                  .status == 401);
        const auto token = api.login("new.user", "long-enough");
        CHECK(api.client.request("GET", "/profile").status == 401);
        auto p = api.client.request("GET", "/profile", std::nullopt, token).json();
        CHECK(p["level"] == "weak");
        CHECK(p["static_profile"]["full_name"] == "New User");
        r = api.client.request("PATCH", "/profile/preferences", json{{"lang", "it"}}, token);
        CHECK(r.status == 200);
        CHECK(r.json()["dynamic_preferences"]["lang"] == "it");
        r = api.client.request("PATCH", "/profile/preferences", json{{"full_name", "X"}}, token);
        CHECK(r.status == 400);
        CHECK(r.json()["error"] == "StaticAttributeViolation");
    }

    TEST_CASE("strong login through the challenge endpoints") {
        Api api;
        auto key = derive_keypair("api-strong-user");
        CHECK(api.client
                  .request("POST", "/auth/register",
                           json{{"user_id", "anna"}, {"password", "long-enough"},
                                {"public_key", encode_public_key(key.public_key)}})
                  .status == 201);
        auto nonce = api.client.request("POST", "/auth/challenge", json{{"user_id", "anna"}}).json()["nonce"];
        auto sig = base64_encode(sign_detached(*base64_decode(nonce.get<std::string>()), key.secret_key));
        auto r = api.client.request("POST", "/auth/respond", json{{"user_id", "anna"}, {"nonce", nonce}, {"signature", sig}});
        REQUIRE(r.status == 200);
        CHECK(r.json()["level"] == "strong");
        auto invoke = api.client.request("POST", "/services/school.transfer-notice/invoke", json{{"payload", "p"}},
                                         r.json()["token"].get<std::string>());
        CHECK(invoke.status == 200);
        CHECK(invoke.json()["seq"] == 1);
    }

    TEST_CASE("CORS reflects configured origins only") {
        Api api;
        HttpRequest req{"GET", "/health", {}, {{"origin", "http://portal-b.example"}}, ""};
        auto r = api.router.handle(req);
        CHECK(r.headers["Access-Control-Allow-Origin"] == "http://portal-b.example");
        req.headers["origin"] = "http://evil.example";
        CHECK_FALSE(api.router.handle(req).headers.contains("Access-Control-Allow-Origin"));
        HttpRequest pre{"OPTIONS", "/services/x/invoke", {}, {{"origin", "http://portal-a.example"}}, ""};
        r = api.router.handle(pre);
        CHECK(r.status == 204);
        CHECK(r.headers["Access-Control-Allow-Headers"].find("Authorization") != std::string::npos);
    }

    TEST_CASE("events through the API") {
        Api api;
        auto sub = api.client.request("POST", "/subscriptions",
                                      json{{"admin_id", "comune_new"}, {"port_id", "inbox"},
                                           {"topic", "school.enrollment.transferred"}});
        REQUIRE(sub.status == 201);
        const auto sub_id = sub.json()["sub_id"].get<std::string>();
        auto school = make_simulated_admin("school", api.scenario.seed, {});
        auto e = build_envelope({"school", "events"}, {"school", "school.enrollment.transferred"}, Profile::AsyncEvent,
                                MessageKind::Event, {"text/plain", to_bytes("moved")}, std::nullopt, api.gw.clock());
        e = sign_envelope(e, school.keys.secret_key, school.key_id, api.gw.keys());
        auto pub = api.client.post_raw("/topics/school.enrollment.transferred/publish", serialize_envelope(e));
        REQUIRE(pub.status == 200);
        CHECK(api.client.post_raw("/topics/school.enrollment.transferred/publish", serialize_envelope(e))
                  .json()["duplicate"] == true);
        auto pulled = api.client.request("GET", "/subscriptions/" + sub_id + "/pull", std::nullopt, "", {{"max", "5"}});
        REQUIRE(pulled.json()["events"].size() == 1);
        const auto seq = pulled.json()["events"][0]["global_seq"].get<std::uint64_t>();
        CHECK(api.client.request("POST", "/subscriptions/" + sub_id + "/ack", json{{"up_to", seq}}).json()["cursor"] == seq);
        CHECK(api.client.request("POST", "/subscriptions/" + sub_id + "/ack", json{{"up_to", seq - 1}}).status == 409);
    }

    TEST_CASE("audit query filters") {
        Api api;
        const auto token = api.login("mario.rossi", "correct-horse-42");
        api.client.request("POST", "/services/anagrafe.certificate/invoke", json{{"payload", "X"}}, token);
        auto all = api.client.request("GET", "/audit").json();
        auto ex = api.client.request("GET", "/audit", std::nullopt, "", {{"category", "exchange_request"}}).json();
        CHECK(ex.size() == 1);
        CHECK(all.size() > ex.size());
        CHECK(api.client.request("GET", "/audit", std::nullopt, "", {{"category", "nope"}}).status == 400);
        auto corr = ex[0]["correlation_id"].get<std::string>();
        CHECK(api.client.request("GET", "/audit/trace/" + corr).json().size() == 2);
    }

    TEST_CASE("socket server serves the same router") {
        Api api;
        HttpServer server(api.router);
        const int port = server.bind("127.0.0.1", 0);
        REQUIRE(port > 0);
        server.start();
        HttpClient http("127.0.0.1", port);
        auto h = http.request("GET", "/health");
        CHECK(h.status == 200);
        CHECK(h.json()["status"] == "ok");
        auto login = http.request("POST", "/auth/login", json{{"user_id", "mario.rossi"}, {"password", "correct-horse-42"}});
        CHECK(login.status == 200);
        auto p = http.request("GET", "/profile", std::nullopt, login.json()["token"].get<std::string>());
        CHECK(p.json()["user_id"] == "mario.rossi");
        server.stop();
        HttpClient dead("127.0.0.1", port, Millis{300});
        CHECK(dead.request("GET", "/health").status == 0);
    }
}

TEST_SUITE("scenario") {
    TEST_CASE("bundled residence-change scenario passes") {
        auto scenario = load_scenario(kScenarios / "residence-change.json");
        Gateway gw(api_config());
        auto report = run_scenario(gw, scenario);
        for (const auto& a : report.assertions) CHECK_MESSAGE(a.pass, a.name << ": " << a.detail);
        CHECK(report.pass);
        CHECK(report.traces.at("case").size() == 16);
        CHECK(report.bindings.count("citizen") == 0);
    }

    TEST_CASE("wrong expected outcome is reported as a failure") {
        auto doc = json::parse(std::ifstream(kScenarios / "residence-change.json"));
        doc["assertions"][0]["equals"] = "faulted";
        auto scenario = scenario_from_json(doc, kScenarios);
        Gateway gw(api_config());
        auto report = run_scenario(gw, scenario);
        CHECK_FALSE(report.pass);
        CHECK_FALSE(report.assertions[0].pass);
        CHECK(report.assertions[1].pass);
    }

    TEST_CASE("empty script passes with an empty trace") {
        auto scenario = scenario_from_json({{"name", "empty"}}, kScenarios);
        Gateway gw(api_config());
        auto report = run_scenario(gw, scenario);
        CHECK(report.pass);
        CHECK(report.assertions.empty());
        CHECK(report.traces.empty());
    }

    TEST_CASE("dangling references are rejected") {
        auto doc = json::parse(std::ifstream(kScenarios / "residence-change.json"));
        doc["script"][0]["user"] = "ghost";
        CHECK_THROWS_AS(scenario_from_json(doc, kScenarios), Error);
        doc = json::parse(std::ifstream(kScenarios / "residence-change.json"));
        doc["script"][2]["token"] = "nobody";
        CHECK_THROWS_AS(scenario_from_json(doc, kScenarios), Error);
    }

    TEST_CASE("rejected approval ends faulted") {
        auto doc = json::parse(std::ifstream(kScenarios / "residence-change.json"));
        doc["script"][5]["outcome"] = "reject";
        doc["assertions"] = json::array({{{"type", "instance_status"}, {"instance", "case"}, {"token", "citizen"},
                                          {"equals", "faulted"}}});
        Gateway gw(api_config());
        auto report = run_scenario(gw, scenario_from_json(doc, kScenarios));
        CHECK(report.pass);
    }
}
