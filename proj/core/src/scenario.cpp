// SPDX-License-Identifier: Apache-2.0
#include "ssc/scenario.hpp"

#include "ssc/codec.hpp"
#include "ssc/error.hpp"

#include <fstream>
#include <set>

namespace ssc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) fail(ErrorCode::ScenarioError, "cannot read " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::ScenarioError, file.string() + ": " + e.what());
    }
}

std::string need(const json& step, const char* key, std::size_t index) {
    auto it = step.find(key);
    if (it == step.end() || !it->is_string())
        fail(ErrorCode::ScenarioError, "script step " + std::to_string(index) + " needs '" + key + "'");
    return it->get<std::string>();
}

/// Checks that every script step and assertion refers to seeded entities or to
/// names bound by an earlier step.
void check_references(const Scenario& s) {
    std::set<std::string> users, admins, services, topics(s.topics.begin(), s.topics.end()), tokens, instances;
    for (const auto& u : s.users) users.insert(u.at("user_id").get<std::string>());
    for (const auto& a : s.administrations) admins.insert(a.admin_id);
    for (const auto& d : s.catalog.value("services", json::array())) services.insert(d.at("service_id").get<std::string>());

    auto ref = [](const std::set<std::string>& set, const std::string& name, const char* what, std::size_t i) {
        if (!set.contains(name))
            fail(ErrorCode::ScenarioError,
                 "script step " + std::to_string(i) + " references unknown " + what + " '" + name + "'");
    };
    for (std::size_t i = 0; i < s.script.size(); ++i) {
        const auto& step = s.script[i];
        const auto action = need(step, "action", i);
        if (action == "login") {
            ref(users, need(step, "user", i), "user", i);
            tokens.insert(need(step, "as", i));
        } else if (action == "submit") {
            ref(tokens, need(step, "token", i), "token", i);
            ref(services, need(step, "service_id", i), "service", i);
            if (step.contains("as")) instances.insert(need(step, "as", i));
        } else if (action == "publish") {
            ref(admins, need(step, "admin", i), "administration", i);
            ref(topics, need(step, "topic", i), "topic", i);
        } else if (action == "claim" || action == "complete") {
            ref(tokens, need(step, "token", i), "token", i);
            ref(instances, need(step, "instance", i), "instance", i);
            need(step, "step", i);
            if (action == "complete") need(step, "outcome", i);
        } else if (action == "advance") {
            ref(tokens, need(step, "token", i), "token", i);
            ref(instances, need(step, "instance", i), "instance", i);
        } else if (action == "exchange") {
            ref(admins, need(step, "from", i), "administration", i);
            const auto& to = step.at("to");
            ref(admins, to.at("admin_id").get<std::string>(), "administration", i);
        } else {
            fail(ErrorCode::ScenarioError, "script step " + std::to_string(i) + ": unknown action '" + action + "'");
        }
    }
    for (std::size_t i = 0; i < s.assertions.size(); ++i) {
        const auto& a = s.assertions[i];
        const auto type = a.value("type", std::string());
        auto aref = [&](const std::set<std::string>& set, const char* key, const char* what) {
            const auto name = a.value(key, std::string());
            if (!set.contains(name))
                fail(ErrorCode::ScenarioError,
                     "assertion " + std::to_string(i) + " references unknown " + what + " '" + name + "'");
        };
        if (type == "instance_status" || type == "variable" || type == "trace") {
            aref(instances, "instance", "instance");
            aref(tokens, "token", "token");
        } else if (type == "open_tasks") {
            aref(tokens, "token", "token");
        } else {
            fail(ErrorCode::ScenarioError, "assertion " + std::to_string(i) + ": unknown type '" + type + "'");
        }
    }
}

}  // namespace

Scenario scenario_from_json(const json& j, const fs::path& base_dir) {
    Scenario s;
    try {
        s.name = j.at("name").get<std::string>();
        s.seed = j.value("seed", s.seed);
        for (const auto& a : j.value("administrations", json::array())) {
            ScenarioAdmin admin{a.at("admin_id").get<std::string>(), {}};
            const auto services = a.value("services", json::object());
            for (const auto& [sid, spec] : services.items())
                admin.services[sid] = handler_spec_from_json(spec);
            s.administrations.push_back(std::move(admin));
        }
        s.topics = j.value("topics", std::vector<std::string>{});
        s.catalog = j.value("catalog", json::object());
        s.users = j.value("users", json::array());
        s.models = j.value("models", json::array());
        s.script = j.value("script", json::array());
        s.assertions = j.value("assertions", json::array());
    } catch (const json::exception& e) {
        fail(ErrorCode::ScenarioError, e.what());
    } catch (const Error& e) {
        fail(ErrorCode::ScenarioError, e.what());
    }
    s.base_dir = base_dir;
    try {
        check_references(s);
    } catch (const json::exception& e) {
        fail(ErrorCode::ScenarioError, e.what());
    }
    return s;
}

Scenario load_scenario(const fs::path& file) {
    return scenario_from_json(read_file(file), fs::absolute(file).parent_path());
}

void seed_scenario(Gateway& gw, const Scenario& s) {
    for (const auto& a : s.administrations) {
        bool online = !a.services.empty();
        for (const auto& [sid, spec] : a.services) online = online && gw.ports().routable({a.admin_id, sid});
        const auto admin = make_simulated_admin(a.admin_id, s.seed, a.services);
        if (online) gw.keys().ensure_key(admin.admin_id, admin.key_id, admin.keys.public_key);
        else gw.spawn_simulated_admin(admin);
    }
    for (const auto& t : s.topics) gw.events().create_topic(t);
    gw.seed_models(s.models);
    gw.seed_catalog(s.catalog);
    gw.seed_users(s.users);
}

json trace_signature(const AuditRecord& r) {
    return {{"category", to_string(r.category)}, {"actor", r.actor}, {"subject", r.subject},
            {"outcome", to_string(r.outcome)}};
}

json to_json(const ScenarioReport& r) {
    json assertions = json::array();
    for (const auto& a : r.assertions) assertions.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    json traces = json::object();
    for (const auto& [name, records] : r.traces) {
        json t = json::array();
        for (const auto& rec : records) t.push_back(to_json(rec));
        traces[name] = std::move(t);
    }
    return {{"name", r.name}, {"pass", r.pass}, {"assertions", assertions}, {"traces", traces},
            {"bindings", r.bindings}};
}

ScriptRunner::ScriptRunner(const Scenario& scenario, GatewayClient& client) : scenario_(scenario), client_(&client) {
    for (const auto& a : scenario.administrations)
        admins_.emplace(a.admin_id, make_simulated_admin(a.admin_id, scenario.seed, a.services));
}

const SimulatedAdministration& ScriptRunner::admin(const std::string& admin_id) const {
    auto it = admins_.find(admin_id);
    if (it == admins_.end()) fail(ErrorCode::ScenarioError, "unknown administration '" + admin_id + "'");
    return it->second;
}

const std::string& ScriptRunner::binding(const json& step, const char* key) const {
    const auto name = step.at(key).get<std::string>();
    auto it = bindings_.find(name);
    if (it == bindings_.end()) fail(ErrorCode::ScenarioError, "'" + name + "' has not been bound yet");
    return it->second;
}

json ScriptRunner::call(const std::string& method, const std::string& path, const json& body,
                        const std::string& token, std::initializer_list<int> tolerated) {
    const auto res = client_->request(method, path, body.is_null() ? std::nullopt : std::optional<json>(body), token);
    if (res.status == 0) fail(ErrorCode::ScenarioError, "transport failure on " + method + " " + path + ": " + res.body);
    const bool ok = res.status < 400 || std::find(tolerated.begin(), tolerated.end(), res.status) != tolerated.end();
    if (!ok)
        fail(ErrorCode::ScenarioError, method + " " + path + " -> " + std::to_string(res.status) + " " + res.body);
    return res.json();
}

std::string ScriptRunner::task_for(const std::string& token, const std::string& instance, const std::string& step) {
    const auto res = client_->request("GET", "/tasks", std::nullopt, token, {{"instance_id", instance}});
    if (res.status != 200) fail(ErrorCode::ScenarioError, "listing tasks failed: " + res.body);
    for (const auto& t : res.json())
        if (t.at("step") == step) return t.at("task_id").get<std::string>();
    fail(ErrorCode::ScenarioError, "no task for step '" + step + "' of instance " + instance);
}

void ScriptRunner::run_step(std::size_t index) {
    const auto& step = scenario_.script.at(index);
    const auto action = step.at("action").get<std::string>();

    if (action == "login") {
        const auto user = step.at("user").get<std::string>();
        std::string password;
        for (const auto& u : scenario_.users)
            if (u.at("user_id") == user) password = u.at("password").get<std::string>();
        const auto res = call("POST", "/auth/login", {{"user_id", user}, {"password", password}}, {});
        const auto name = step.at("as").get<std::string>();
        bindings_[name] = res.at("token").get<std::string>();
        bindings_[name + ".user"] = user;
        return;
    }
    if (action == "submit") {
        json body{{"inputs", step.value("inputs", json::object())}, {"payload", step.value("payload", std::string())}};
        if (step.contains("correlation")) body["correlation"] = step.at("correlation");
        const auto res = call("POST", "/services/" + step.at("service_id").get<std::string>() + "/invoke", body,
                              binding(step, "token"));
        if (step.contains("as") && res.contains("instance_id"))
            bindings_[step.at("as").get<std::string>()] = res.at("instance_id").get<std::string>();
        return;
    }
    if (action == "publish") {
        const auto& a = admin(step.at("admin").get<std::string>());
        const auto topic = step.at("topic").get<std::string>();
        auto e = build_envelope({a.admin_id, step.value("port_id", std::string("events"))}, {a.admin_id, topic},
                                Profile::AsyncEvent, MessageKind::Event,
                                {"application/json", to_bytes(step.value("payload", std::string()))},
                                step.contains("correlation") ? std::optional(step.at("correlation").get<std::string>())
                                                             : std::nullopt);
        // A stable id makes a retried publish a duplicate rather than a second event.
        e.envelope_id = stable_uuid(scenario_.name + "/" + std::to_string(index));
        KeyDirectory own;
        own.add_key(a.admin_id, a.key_id, a.keys.public_key);
        const auto signed_event = sign_envelope(e, a.keys.secret_key, a.key_id, own);
        const auto res = client_->post_raw("/topics/" + topic + "/publish", serialize_envelope(signed_event));
        if (res.status == 0 || res.status >= 400)
            fail(ErrorCode::ScenarioError, "publish -> " + std::to_string(res.status) + " " + res.body);
        return;
    }
    if (action == "claim" || action == "complete") {
        const auto& token = binding(step, "token");
        const auto task = task_for(token, binding(step, "instance"), step.at("step").get<std::string>());
        if (action == "claim") {
            const auto res = call("POST", "/tasks/" + task + "/claim", json::object(), token, {409});
            if (res.contains("error") && res.at("error") != "AlreadyClaimed")
                fail(ErrorCode::ScenarioError, "claim failed: " + res.dump());
        } else {
            const auto res = call("POST", "/tasks/" + task + "/complete", {{"outcome", step.at("outcome")}}, token, {409});
            if (res.contains("error") && res.at("error") != "AlreadyCompleted")
                fail(ErrorCode::ScenarioError, "complete failed: " + res.dump());
        }
        return;
    }
    if (action == "advance") {
        call("POST", "/instances/" + binding(step, "instance") + "/advance", json::object(), binding(step, "token"));
        return;
    }
    if (action == "exchange") {
        const auto& from = admin(step.at("from").get<std::string>());
        const auto& to = step.at("to");
        auto e = build_envelope({from.admin_id, step.value("port_id", std::string("front"))},
                                {to.at("admin_id").get<std::string>(), to.at("service_id").get<std::string>()},
                                Profile::Sync, MessageKind::Request,
                                {"text/plain", to_bytes(step.value("payload", std::string()))},
                                stable_uuid(scenario_.name + "/exchange/" + std::to_string(index)));
        KeyDirectory own;
        own.add_key(from.admin_id, from.key_id, from.keys.public_key);
        const auto res = client_->post_raw("/exchange", serialize_envelope(sign_envelope(e, from.keys.secret_key,
                                                                                         from.key_id, own)));
        if (res.status != 200) fail(ErrorCode::ScenarioError, "exchange -> " + std::to_string(res.status) + " " + res.body);
        const auto reply = parse_envelope(res.body);
        if (step.contains("as")) bindings_[step.at("as").get<std::string>()] = std::string(to_string(reply.message_kind));
        if (step.contains("expect") && step.at("expect") != to_string(reply.message_kind))
            fail(ErrorCode::ScenarioError, "exchange answered with " + std::string(to_string(reply.message_kind)));
        return;
    }
    fail(ErrorCode::ScenarioError, "unknown action '" + action + "'");
}

void ScriptRunner::run_all() {
    for (std::size_t i = 0; i < steps(); ++i) run_step(i);
}

ScenarioReport ScriptRunner::evaluate() {
    ScenarioReport report;
    report.name = scenario_.name;
    std::set<std::string> secret;
    for (const auto& step : scenario_.script)
        if (step.at("action") == "login") secret.insert(step.at("as").get<std::string>());
    for (const auto& [k, v] : bindings_)
        if (!secret.contains(k)) report.bindings[k] = v;

    for (const auto& step : scenario_.script) {
        if (step.at("action") != "submit" || !step.contains("as")) continue;
        const auto name = step.at("as").get<std::string>();
        auto id = bindings_.find(name);
        if (id == bindings_.end()) continue;
        const auto res = client_->request("GET", "/audit/trace/" + id->second);
        if (res.status != 200) continue;
        for (const auto& r : res.json()) report.traces[name].push_back(audit_record_from_json(r));
    }

    auto instance = [&](const json& a) -> std::optional<json> {
        auto id = bindings_.find(a.at("instance").get<std::string>());
        auto tok = bindings_.find(a.at("token").get<std::string>());
        if (id == bindings_.end() || tok == bindings_.end()) return std::nullopt;
        const auto res = client_->request("GET", "/instances/" + id->second, std::nullopt, tok->second);
        if (res.status != 200) return std::nullopt;
        return res.json();
    };

    for (const auto& a : scenario_.assertions) {
        const auto type = a.at("type").get<std::string>();
        AssertionResult r;
        if (type == "instance_status") {
            r.name = "instance " + a.at("instance").get<std::string>() + " status";
            const auto want = a.at("equals").get<std::string>();
            auto inst = instance(a);
            const auto got = inst ? inst->at("status").get<std::string>() : std::string("<unavailable>");
            r.pass = got == want;
            r.detail = "expected " + want + ", got " + got;
        } else if (type == "variable") {
            const auto var = a.at("name").get<std::string>();
            r.name = "instance " + a.at("instance").get<std::string>() + " variable " + var;
            const auto want = a.at("equals").get<std::string>();
            auto inst = instance(a);
            std::string got = "<unset>";
            if (inst && inst->at("variables").contains(var)) got = inst->at("variables").at(var).get<std::string>();
            r.pass = got == want;
            r.detail = "expected '" + want + "', got '" + got + "'";
        } else if (type == "trace") {
            const auto name = a.at("instance").get<std::string>();
            const auto golden_file = scenario_.base_dir / a.at("golden").get<std::string>();
            r.name = "instance " + name + " trace matches " + golden_file.filename().string();
            const auto golden = read_file(golden_file);
            json actual = json::array();
            for (const auto& rec : report.traces[name]) actual.push_back(trace_signature(rec));
            r.pass = actual == golden;
            if (r.pass) {
                r.detail = std::to_string(actual.size()) + " records";
            } else {
                std::size_t i = 0;
                while (i < actual.size() && i < golden.size() && actual[i] == golden[i]) ++i;
                r.detail = "first difference at record " + std::to_string(i) + ": expected " +
                           (i < golden.size() ? golden[i].dump() : "<end>") + ", got " +
                           (i < actual.size() ? actual[i].dump() : "<end>");
            }
        } else if (type == "open_tasks") {
            std::map<std::string, std::string> q{{"state", "open"}};
            if (a.contains("role")) q["role"] = a.at("role").get<std::string>();
            r.name = "open tasks" + (a.contains("role") ? " for " + q["role"] : std::string());
            const auto tok = bindings_.find(a.at("token").get<std::string>());
            const auto want = a.at("equals").get<std::size_t>();
            std::size_t got = 0;
            bool ok = false;
            if (tok != bindings_.end()) {
                const auto res = client_->request("GET", "/tasks", std::nullopt, tok->second, q);
                ok = res.status == 200;
                if (ok) got = res.json().size();
            }
            r.pass = ok && got == want;
            r.detail = "expected " + std::to_string(want) + ", got " + (ok ? std::to_string(got) : "<unavailable>");
        }
        report.pass = report.pass && r.pass;
        report.assertions.push_back(std::move(r));
    }
    return report;
}

ScenarioReport run_scenario(Gateway& gateway, const Scenario& scenario) {
    seed_scenario(gateway, scenario);
    ApiRouter router(gateway, gateway.config().cors_origins);
    InProcessClient client(router);
    ScriptRunner runner(scenario, client);
    std::optional<AssertionResult> script_failure;
    for (std::size_t i = 0; i < runner.steps(); ++i) {
        try {
            runner.run_step(i);
        } catch (const Error& e) {
            script_failure = AssertionResult{
                "script step " + std::to_string(i) + " (" + scenario.script[i].at("action").get<std::string>() + ")",
                false, e.detail()};
            break;
        }
    }
    auto report = runner.evaluate();
    if (script_failure) {
        report.assertions.insert(report.assertions.begin(), *script_failure);
        report.pass = false;
    }
    return report;
}

}  // namespace ssc
