// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "ssc/error.hpp"
#include "ssc/orchestration.hpp"

#include <thread>

using namespace ssc;
using nlohmann::json;
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

/// Engine over an echo invoker; destinations in `faulty` fault instead.
struct Rig {
    ManualClock clock;
    AuditLog audit{std::make_unique<AppendLog>(), clock};
    std::set<std::string> faulty;
    std::map<std::string, std::set<std::string>> roles{{"clerk1", {"clerk"}}, {"clerk2", {"clerk"}}};
    std::unique_ptr<Engine> engine;

    explicit Rig(std::unique_ptr<AppendLog> store = std::make_unique<AppendLog>()) { open(std::move(store)); }

    void open(std::unique_ptr<AppendLog> store) {
        engine.reset();
        engine = std::make_unique<Engine>(
            std::move(store), audit, clock,
            [this](const ProcessInstance&, const std::string&, const Destination& d, const std::string& payload) {
                if (faulty.contains(d.service_id)) return InvokeResult{false, "backend down", "backend_fault"};
                return InvokeResult{true, d.service_id + "(" + payload + ")", ""};
            },
            [this](const std::string& user, const std::string& role) { return roles[user].contains(role); },
            Millis{60'000});
    }
};

json terminate(const char* status = "completed") { return {{"kind", "terminate"}, {"status", status}}; }

json invoke(const std::string& service, const std::string& payload, const std::string& out, const std::string& next,
            const std::string& on_fault = "") {
    json j{{"kind", "service_invoke"},
           {"destination", {{"admin_id", "adm"}, {"service_id", service}}},
           {"payload", payload},
           {"output_var", out},
           {"next", next}};
    if (!on_fault.empty()) j["on_fault"] = on_fault;
    return j;
}

ProcessModel chain_model() {
    return process_model_from_json({{"model_id", "chain"},
                                    {"entry", "a"},
                                    {"variables", {"in", "x", "y", "z"}},
                                    {"steps",
                                     {{"a", invoke("s1", "${in}", "x", "b")},
                                      {"b", invoke("s2", "${x}", "y", "c")},
                                      {"c", invoke("s3", "${y}", "z", "end", "bad")},
                                      {"end", terminate()},
                                      {"bad", terminate("faulted")}}}});
}

ProcessModel task_model() {
    return process_model_from_json(
        {{"model_id", "approve"},
         {"entry", "ask"},
         {"variables", {"who", "decision"}},
         {"steps",
          {{"ask",
            {{"kind", "human_task"}, {"role", "clerk"}, {"prompt", "approve ${who}?"}, {"outcome_var", "decision"},
             {"next", "decide"}}},
           {"decide", {{"kind", "exclusive_branch"}, {"predicate", "decision == yes"}, {"if_true", "ok"}, {"if_false", "no"}}},
           {"ok", terminate()},
           {"no", terminate("faulted")}}}});
}

ProcessModel wait_model(std::optional<int> timeout_ms = std::nullopt) {
    json wait{{"kind", "wait_event"}, {"topic", "t"}, {"correlation_var", "key"}, {"output_var", "got"}, {"next", "end"}};
    if (timeout_ms) {
        wait["timeout_ms"] = *timeout_ms;
        wait["on_timeout"] = "late";
    }
    json steps{{"w", wait}, {"end", terminate()}};
    if (timeout_ms) steps["late"] = terminate("faulted");
    return process_model_from_json(
        {{"model_id", "wait"}, {"entry", "w"}, {"variables", {"key", "got"}}, {"steps", steps}});
}

ProcessModel split_model() {
    json task_a{{"kind", "human_task"}, {"role", "clerk"}, {"outcome_var", "a"}, {"next", "j"}};
    json task_b{{"kind", "wait_event"}, {"topic", "t"}, {"correlation_var", "key"}, {"output_var", "b"}, {"next", "j"}};
    return process_model_from_json({{"model_id", "split"},
                                    {"entry", "fork"},
                                    {"variables", {"key", "a", "b"}},
                                    {"steps",
                                     {{"fork", {{"kind", "parallel_split"}, {"branches", {"ta", "wb"}}, {"join", "j"}}},
                                      {"ta", task_a},
                                      {"wb", task_b},
                                      {"j", {{"kind", "join"}, {"arity", 2}, {"next", "end"}}},
                                      {"end", terminate()}}}});
}

Envelope event(const std::string& correlation, const std::string& text) {
    ManualClock clock;
    return build_envelope({"school", "events"}, {"school", "t"}, Profile::AsyncEvent, MessageKind::Event,
                          {"text/plain", to_bytes(text)}, correlation, clock);
}

std::vector<std::string> outcomes(const ProcessInstance& p) {
    std::vector<std::string> out;
    for (const auto& r : p.history) out.push_back(r.step + ":" + r.outcome);
    return out;
}

}  // namespace

TEST_SUITE("orchestration") {
    TEST_CASE("registration, versioning and validation") {
        Rig rig;
        auto trivial = process_model_from_json({{"model_id", "t"}, {"entry", "end"}, {"steps", {{"end", terminate()}}}});
        CHECK(rig.engine->register_model(trivial) == 1);
        CHECK(rig.engine->register_model(trivial) == 2);
        CHECK(rig.engine->ensure_model(trivial) == 2);
        CHECK(rig.engine->model("t", 1).version == 1);

        auto broken = process_model_from_json(
            {{"model_id", "b"},
             {"entry", "x"},
             {"variables", {"v"}},
             {"steps", {{"x", {{"kind", "exclusive_branch"}, {"predicate", "v == 1"}, {"if_true", "end"}, {"if_false", "gone"}}},
                        {"end", terminate()}}}});
        CHECK(code_of([&] { rig.engine->register_model(broken); }) == ErrorCode::ValidationFailed);
        CHECK_FALSE(validate_model(broken).empty());
        CHECK(validate_model(chain_model()).empty());
        CHECK(validate_model(split_model()).empty());

        auto bad_join = split_model();
        std::get<JoinStep>(bad_join.steps.at("j")).arity = 3;
        CHECK_FALSE(validate_model(bad_join).empty());
        CHECK(process_model_from_json(to_json(chain_model())).steps.size() == 5);
    }

    TEST_CASE("trivial and unknown models") {
        Rig rig;
        rig.engine->register_model(
            process_model_from_json({{"model_id", "t"}, {"entry", "end"}, {"steps", {{"end", terminate()}}}}));
        auto id = rig.engine->start_instance("t", std::nullopt, {});
        auto st = rig.engine->instance_state(id);
        CHECK(st.status == InstanceStatus::Completed);
        CHECK(st.frontier.empty());
        CHECK(code_of([&] { rig.engine->start_instance("nope", std::nullopt, {}); }) == ErrorCode::UnknownModel);
        CHECK(code_of([&] { rig.engine->instance_state("nope"); }) == ErrorCode::UnknownInstance);
    }

    TEST_CASE("chain of three invokes matches the hand-simulated trace") {
        Rig rig;
        rig.engine->register_model(chain_model());
        CHECK(code_of([&] { rig.engine->start_instance("chain", std::nullopt, {}); }) == ErrorCode::MissingInput);
        auto id = rig.engine->start_instance("chain", std::nullopt, {{"in", "v"}});
        auto st = rig.engine->instance_state(id);
        CHECK(st.status == InstanceStatus::Completed);
        CHECK(outcomes(st) == std::vector<std::string>{"a:ok", "b:ok", "c:ok", "end:completed"});
        CHECK(st.variables.at("z") == "s3(s2(s1(v)))");
        // Start + 4 transitions.
        CHECK(rig.audit.trace(id).size() == 5);
        auto again = rig.engine->advance(id);
        CHECK(again.history.size() == st.history.size());
    }

    TEST_CASE("fault takes the on_fault edge") {
        Rig rig;
        rig.faulty.insert("s3");
        rig.engine->register_model(chain_model());
        auto st = rig.engine->instance_state(rig.engine->start_instance("chain", std::nullopt, {{"in", "v"}}));
        CHECK(st.status == InstanceStatus::Faulted);
        CHECK(outcomes(st).back() == "bad:faulted");
    }

    TEST_CASE("human task claim and complete") {
        Rig rig;
        rig.engine->register_model(task_model());
        CHECK(rig.engine->list_tasks().empty());
        auto id = rig.engine->start_instance("approve", std::nullopt, {{"who", "mario"}});
        CHECK(rig.engine->instance_state(id).status == InstanceStatus::WaitingTask);
        auto tasks = rig.engine->list_tasks();
        REQUIRE(tasks.size() == 1);
        CHECK(tasks[0].prompt == "approve mario?");
        TaskFilter other;
        other.role = "auditor";
        CHECK(rig.engine->list_tasks(other).empty());

        const auto task = tasks[0].task_id;
        CHECK(code_of([&] { rig.engine->claim_task(task, "citizen"); }) == ErrorCode::RoleDenied);
        rig.engine->claim_task(task, "clerk1");
        CHECK(code_of([&] { rig.engine->claim_task(task, "clerk2"); }) == ErrorCode::AlreadyClaimed);
        CHECK(code_of([&] { rig.engine->complete_task(task, "clerk2", "yes"); }) == ErrorCode::NotClaimant);
        auto st = rig.engine->complete_task(task, "clerk1", "yes");
        CHECK(st.status == InstanceStatus::Completed);
        CHECK(st.variables.at("decision") == "yes");
        CHECK(code_of([&] { rig.engine->complete_task(task, "clerk1", "yes"); }) == ErrorCode::AlreadyCompleted);
        CHECK(code_of([&] { rig.engine->claim_task("nope", "clerk1"); }) == ErrorCode::UnknownTask);
    }

    TEST_CASE("expired lease lets another user claim") {
        Rig rig;
        rig.engine->register_model(task_model());
        rig.engine->start_instance("approve", std::nullopt, {{"who", "x"}});
        auto task = rig.engine->list_tasks()[0].task_id;
        rig.engine->claim_task(task, "clerk1");
        rig.clock.advance(Millis{60'001});
        CHECK(rig.engine->list_tasks()[0].state == TaskState::Open);
        CHECK(rig.engine->claim_task(task, "clerk2").claimant == "clerk2");
        CHECK(code_of([&] { rig.engine->complete_task(task, "clerk1", "yes"); }) == ErrorCode::NotClaimant);
    }

    TEST_CASE("event delivery matches on correlation only") {
        Rig rig;
        rig.engine->register_model(wait_model());
        auto a = rig.engine->start_instance("wait", std::nullopt, {{"key", "A"}});
        auto b = rig.engine->start_instance("wait", std::nullopt, {{"key", "B"}});
        CHECK(rig.engine->instance_state(a).status == InstanceStatus::WaitingEvent);
        CHECK(rig.engine->deliver_event("t", event("C", "x")).empty());
        CHECK(rig.engine->deliver_event("other", event("A", "x")).empty());
        auto e = event("B", "hello");
        CHECK(rig.engine->deliver_event("t", e) == std::vector<std::string>{b});
        CHECK(rig.engine->deliver_event("t", e).empty());
        CHECK(rig.engine->instance_state(a).status == InstanceStatus::WaitingEvent);
        auto sb = rig.engine->instance_state(b);
        CHECK(sb.status == InstanceStatus::Completed);
        CHECK(sb.variables.at("got") == "hello");
    }

    TEST_CASE("wait timeout fires on advance") {
        Rig rig;
        rig.engine->register_model(wait_model(1000));
        auto id = rig.engine->start_instance("wait", std::nullopt, {{"key", "A"}});
        rig.clock.advance(Millis{999});
        CHECK(rig.engine->advance(id).status == InstanceStatus::WaitingEvent);
        rig.clock.advance(Millis{1});
        auto st = rig.engine->advance(id);
        CHECK(st.status == InstanceStatus::Faulted);
        CHECK(outcomes(st) == std::vector<std::string>{"w:timeout", "late:faulted"});
    }

    TEST_CASE("start with a correlation is idempotent") {
        Rig rig;
        rig.engine->register_model(wait_model());
        auto a = rig.engine->start_instance("wait", std::nullopt, {{"key", "A"}}, "case-1");
        CHECK(rig.engine->start_instance("wait", std::nullopt, {{"key", "A"}}, "case-1") == a);
        CHECK(rig.engine->start_instance("wait", std::nullopt, {{"key", "A"}}, "case-2") != a);
        CHECK(rig.engine->instance_ids().size() == 2);
    }

    TEST_CASE("split and join") {
        Rig rig;
        rig.engine->register_model(split_model());
        auto id = rig.engine->start_instance("split", std::nullopt, {{"key", "K"}});
        auto st = rig.engine->instance_state(id);
        CHECK(st.frontier == std::set<std::string>{"ta", "wb"});
        rig.engine->deliver_event("t", event("K", "b!"));
        CHECK(rig.engine->instance_state(id).frontier == std::set<std::string>{"ta"});
        auto task = rig.engine->list_tasks()[0].task_id;
        rig.engine->claim_task(task, "clerk1");
        st = rig.engine->complete_task(task, "clerk1", "a!");
        CHECK(st.status == InstanceStatus::Completed);
        int joins = 0;
        for (const auto& r : st.history) joins += r.outcome == "joined";
        CHECK(joins == 1);
    }

    TEST_CASE("restart replays to the identical state") {
        TempDir dir;
        Rig rig(std::make_unique<AppendLog>(dir / "instances.ndjson"));
        rig.engine->register_model(split_model());
        rig.engine->register_model(task_model());
        auto s1 = rig.engine->start_instance("split", std::nullopt, {{"key", "K"}});
        auto s2 = rig.engine->start_instance("approve", std::nullopt, {{"who", "w"}});
        rig.engine->deliver_event("t", event("K", "b!"));
        TaskFilter f;
        f.instance_id = s2;
        auto task = rig.engine->list_tasks(f)[0].task_id;
        rig.engine->claim_task(task, "clerk2");
        const auto before1 = rig.engine->instance_state(s1);
        const auto before2 = rig.engine->instance_state(s2);

        rig.open(std::make_unique<AppendLog>(dir / "instances.ndjson"));
        auto after1 = rig.engine->instance_state(s1);
        CHECK(after1.history == before1.history);
        CHECK(after1.variables == before1.variables);
        CHECK(after1.frontier == before1.frontier);
        CHECK(after1.status == before1.status);
        CHECK(rig.engine->instance_state(s2).history == before2.history);
        auto t = rig.engine->list_tasks(f);
        REQUIRE(t.size() == 1);
        CHECK(t[0].claimant == "clerk2");

        auto replayed = replay_instance(rig.engine->model("split"), s1, before1.inputs, before1.correlation,
                                        before1.started_at, before1.history);
        CHECK(replayed.variables == before1.variables);
        CHECK(replayed.frontier == before1.frontier);
    }

    TEST_CASE("work retried after a failed state write is traced once") {
        TempDir dir;
        auto store = std::make_unique<AppendLog>(dir / "instances.ndjson");
        auto* log = store.get();
        Rig rig(std::move(store));
        rig.engine->register_model(task_model());

        // The start record reaches the audit log, the instance log write fails.
        log->inject_failure(true);
        CHECK(code_of([&] { rig.engine->start_instance("approve", std::nullopt, {{"who", "w"}}, "case-1"); }) ==
              ErrorCode::StorageFailure);
        log->inject_failure(false);
        rig.open(std::make_unique<AppendLog>(dir / "instances.ndjson"));
        const auto id = rig.engine->start_instance("approve", std::nullopt, {{"who", "w"}}, "case-1");

        TaskFilter f;
        f.instance_id = id;
        const auto task = rig.engine->list_tasks(f).at(0).task_id;
        rig.engine->claim_task(task, "clerk1");

        // Same for the completion: audited, then the transition write fails.
        auto reopened = std::make_unique<AppendLog>(dir / "instances.ndjson");
        log = reopened.get();
        rig.open(std::move(reopened));
        log->inject_failure(true);
        CHECK(code_of([&] { rig.engine->complete_task(task, "clerk1", "yes"); }) == ErrorCode::StorageFailure);
        log->inject_failure(false);
        rig.open(std::make_unique<AppendLog>(dir / "instances.ndjson"));
        CHECK(rig.engine->complete_task(task, "clerk1", "yes").status == InstanceStatus::Completed);

        std::vector<std::string> trace;
        for (const auto& r : rig.audit.trace(id)) trace.push_back(std::string(to_string(r.category)) + ":" + r.subject);
        CHECK(trace == std::vector<std::string>{"orchestration_transition:start", "orchestration_transition:ask",
                                                "task_event:ask", "task_event:ask", "task_event:ask",
                                                "orchestration_transition:ask", "orchestration_transition:decide",
                                                "orchestration_transition:ok"});
    }

    TEST_CASE("replay rejects a diverging history") {
        Rig rig;
        rig.engine->register_model(chain_model());
        auto id = rig.engine->start_instance("chain", std::nullopt, {{"in", "v"}});
        auto st = rig.engine->instance_state(id);
        auto history = st.history;
        std::swap(history[0], history[1]);
        CHECK(code_of([&] {
                  replay_instance(rig.engine->model("chain"), id, st.inputs, st.correlation, st.started_at, history);
              }) == ErrorCode::StorageCorrupt);
    }

    TEST_CASE("concurrent claims succeed exactly once") {
        Rig rig;
        for (int i = 0; i < 50; ++i) rig.roles["u" + std::to_string(i)] = {"clerk"};
        rig.engine->register_model(task_model());
        rig.engine->start_instance("approve", std::nullopt, {{"who", "x"}});
        auto task = rig.engine->list_tasks()[0].task_id;
        std::atomic<int> wins{0}, completions{0};
        std::vector<std::thread> threads;
        for (int i = 0; i < 50; ++i)
            threads.emplace_back([&, i] {
                const auto user = "u" + std::to_string(i);
                try {
                    rig.engine->claim_task(task, user);
                    ++wins;
                    rig.engine->complete_task(task, user, "yes");
                    ++completions;
                } catch (const Error&) {
                }
            });
        for (auto& t : threads) t.join();
        CHECK(wins == 1);
        CHECK(completions == 1);
    }
}
