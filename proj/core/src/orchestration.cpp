// SPDX-License-Identifier: Apache-2.0
#include "ssc/orchestration.hpp"

#include "ssc/codec.hpp"
#include "ssc/error.hpp"
#include "ssc/predicate.hpp"

#include <algorithm>
#include <atomic>

namespace ssc {

using nlohmann::json;

std::string_view to_string(InstanceStatus s) noexcept {
    switch (s) {
        case InstanceStatus::Running: return "running";
        case InstanceStatus::WaitingEvent: return "waiting_event";
        case InstanceStatus::WaitingTask: return "waiting_task";
        case InstanceStatus::Completed: return "completed";
        case InstanceStatus::Faulted: return "faulted";
    }
    return "running";
}

std::optional<InstanceStatus> parse_instance_status(std::string_view s) noexcept {
    for (auto st : {InstanceStatus::Running, InstanceStatus::WaitingEvent, InstanceStatus::WaitingTask,
                    InstanceStatus::Completed, InstanceStatus::Faulted})
        if (to_string(st) == s) return st;
    return std::nullopt;
}

std::string_view to_string(TaskState s) noexcept {
    switch (s) {
        case TaskState::Open: return "open";
        case TaskState::Claimed: return "claimed";
        case TaskState::Completed: return "completed";
    }
    return "open";
}

std::optional<TaskState> parse_task_state(std::string_view s) noexcept {
    for (auto st : {TaskState::Open, TaskState::Claimed, TaskState::Completed})
        if (to_string(st) == s) return st;
    return std::nullopt;
}

std::string_view step_kind(const StepDef& step) noexcept {
    static constexpr std::string_view names[] = {"service_invoke",  "wait_event",     "human_task", "exclusive_branch",
                                                 "parallel_split", "join",           "terminate"};
    return names[step.index()];
}

// ---------------------------------------------------------------------------
// Model documents

namespace {

std::string str(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) fail(ErrorCode::ValidationFailed, where + ": missing string '" + key + "'");
    return it->get<std::string>();
}

std::string opt_str(const json& j, const char* key) {
    auto it = j.find(key);
    return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

/// Every step name a step can hand control to.
std::vector<std::string> successors(const StepDef& def) {
    return std::visit(
        [](const auto& s) -> std::vector<std::string> {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ServiceInvokeStep>) {
                std::vector<std::string> out{s.next};
                if (!s.on_fault.empty()) out.push_back(s.on_fault);
                return out;
            } else if constexpr (std::is_same_v<T, WaitEventStep>) {
                std::vector<std::string> out{s.next};
                if (s.timeout) out.push_back(s.on_timeout);
                return out;
            } else if constexpr (std::is_same_v<T, HumanTaskStep>) {
                return {s.next};
            } else if constexpr (std::is_same_v<T, ExclusiveBranchStep>) {
                return {s.if_true, s.if_false};
            } else if constexpr (std::is_same_v<T, ParallelSplitStep>) {
                return s.branches;
            } else if constexpr (std::is_same_v<T, JoinStep>) {
                return {s.next};
            } else {
                return {};
            }
        },
        def);
}

}  // namespace

std::set<std::string> ProcessModel::required_inputs() const {
    std::set<std::string> written;
    for (const auto& [name, def] : steps) {
        if (auto* s = std::get_if<ServiceInvokeStep>(&def)) written.insert(s->output_var);
        if (auto* s = std::get_if<WaitEventStep>(&def)) written.insert(s->output_var);
        if (auto* s = std::get_if<HumanTaskStep>(&def)) written.insert(s->outcome_var);
    }
    std::set<std::string> out;
    for (const auto& v : variables)
        if (!written.contains(v)) out.insert(v);
    return out;
}

json to_json(const ProcessModel& m) {
    json steps = json::object();
    for (const auto& [name, def] : m.steps) {
        json s{{"kind", step_kind(def)}};
        std::visit(
            [&](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, ServiceInvokeStep>) {
                    s["destination"] = {{"admin_id", d.destination.admin_id}, {"service_id", d.destination.service_id}};
                    s["payload"] = d.payload_template;
                    s["output_var"] = d.output_var;
                    if (!d.on_fault.empty()) s["on_fault"] = d.on_fault;
                    s["next"] = d.next;
                } else if constexpr (std::is_same_v<T, WaitEventStep>) {
                    s["topic"] = d.topic;
                    s["correlation_var"] = d.correlation_var;
                    s["output_var"] = d.output_var;
                    if (d.timeout) {
                        s["timeout_ms"] = d.timeout->count();
                        s["on_timeout"] = d.on_timeout;
                    }
                    s["next"] = d.next;
                } else if constexpr (std::is_same_v<T, HumanTaskStep>) {
                    s["role"] = d.role;
                    s["prompt"] = d.prompt_template;
                    s["outcome_var"] = d.outcome_var;
                    s["next"] = d.next;
                } else if constexpr (std::is_same_v<T, ExclusiveBranchStep>) {
                    s["predicate"] = d.predicate;
                    s["if_true"] = d.if_true;
                    s["if_false"] = d.if_false;
                } else if constexpr (std::is_same_v<T, ParallelSplitStep>) {
                    s["branches"] = d.branches;
                    s["join"] = d.join;
                } else if constexpr (std::is_same_v<T, JoinStep>) {
                    s["arity"] = d.arity;
                    s["next"] = d.next;
                } else {
                    s["status"] = to_string(d.status);
                }
            },
            def);
        steps[name] = std::move(s);
    }
    json j{{"model_id", m.model_id}, {"entry", m.entry_step}, {"variables", m.variables}, {"steps", steps}};
    if (m.version > 0) j["version"] = m.version;
    return j;
}

ProcessModel process_model_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::ValidationFailed, "model document must be an object");
    ProcessModel m;
    m.model_id = str(j, "model_id", "model");
    m.entry_step = str(j, "entry", "model");
    m.version = j.value("version", 0);
    if (auto it = j.find("variables"); it != j.end()) {
        if (!it->is_array()) fail(ErrorCode::ValidationFailed, "model: 'variables' must be an array");
        for (const auto& v : *it) m.variables.insert(v.get<std::string>());
    }
    auto steps = j.find("steps");
    if (steps == j.end() || !steps->is_object()) fail(ErrorCode::ValidationFailed, "model: missing 'steps' object");
    for (const auto& [name, s] : steps->items()) {
        const auto where = "step '" + name + "'";
        const auto kind = str(s, "kind", where);
        if (kind == "service_invoke") {
            const auto& dest = s.at("destination");
            m.steps.emplace(name, ServiceInvokeStep{{str(dest, "admin_id", where), str(dest, "service_id", where)},
                                                    opt_str(s, "payload"), str(s, "output_var", where),
                                                    opt_str(s, "on_fault"), str(s, "next", where)});
        } else if (kind == "wait_event") {
            WaitEventStep w{str(s, "topic", where), str(s, "correlation_var", where), str(s, "output_var", where),
                            std::nullopt, opt_str(s, "on_timeout"), str(s, "next", where)};
            if (s.contains("timeout_ms")) w.timeout = Millis{s.at("timeout_ms").get<std::int64_t>()};
            m.steps.emplace(name, std::move(w));
        } else if (kind == "human_task") {
            m.steps.emplace(name, HumanTaskStep{str(s, "role", where), opt_str(s, "prompt"),
                                                str(s, "outcome_var", where), str(s, "next", where)});
        } else if (kind == "exclusive_branch") {
            m.steps.emplace(name, ExclusiveBranchStep{str(s, "predicate", where), str(s, "if_true", where),
                                                      str(s, "if_false", where)});
        } else if (kind == "parallel_split") {
            auto b = s.find("branches");
            if (b == s.end() || !b->is_array()) fail(ErrorCode::ValidationFailed, where + ": missing 'branches'");
            m.steps.emplace(name, ParallelSplitStep{b->get<std::vector<std::string>>(), str(s, "join", where)});
        } else if (kind == "join") {
            m.steps.emplace(name, JoinStep{s.value("arity", 2), str(s, "next", where)});
        } else if (kind == "terminate") {
            auto st = parse_instance_status(str(s, "status", where));
            if (!st || (*st != InstanceStatus::Completed && *st != InstanceStatus::Faulted))
                fail(ErrorCode::ValidationFailed, where + ": terminate status must be completed or faulted");
            m.steps.emplace(name, TerminateStep{*st});
        } else {
            fail(ErrorCode::ValidationFailed, where + ": unknown kind '" + kind + "'");
        }
    }
    return m;
}

std::vector<std::string> validate_model(const ProcessModel& m) {
    std::vector<std::string> diags;
    auto diag = [&](const std::string& step, const std::string& what) { diags.push_back("step '" + step + "': " + what); };
    if (m.model_id.empty()) diags.push_back("model_id is empty");
    if (!m.steps.contains(m.entry_step)) diags.push_back("entry step '" + m.entry_step + "' does not exist");

    auto check_var = [&](const std::string& step, const std::string& var, const char* role) {
        if (!m.variables.contains(var)) diag(step, std::string(role) + " '" + var + "' is not a declared variable");
    };
    auto check_template = [&](const std::string& step, const std::string& tmpl) {
        for (const auto& v : template_variables(tmpl)) check_var(step, v, "template variable");
    };

    std::map<std::string, int> join_refs;
    for (const auto& [name, def] : m.steps) {
        for (const auto& target : successors(def))
            if (!m.steps.contains(target)) diag(name, "target '" + target + "' does not exist");
        std::visit(
            [&](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, ServiceInvokeStep>) {
                    if (d.destination.admin_id.empty() || d.destination.service_id.empty())
                        diag(name, "empty destination");
                    check_template(name, d.payload_template);
                    check_var(name, d.output_var, "output_var");
                } else if constexpr (std::is_same_v<T, WaitEventStep>) {
                    check_var(name, d.correlation_var, "correlation_var");
                    check_var(name, d.output_var, "output_var");
                    if (d.timeout && d.timeout->count() <= 0) diag(name, "timeout must be positive");
                    if (d.timeout && d.on_timeout.empty()) diag(name, "timeout without on_timeout");
                } else if constexpr (std::is_same_v<T, HumanTaskStep>) {
                    if (d.role.empty()) diag(name, "empty role");
                    check_template(name, d.prompt_template);
                    check_var(name, d.outcome_var, "outcome_var");
                } else if constexpr (std::is_same_v<T, ExclusiveBranchStep>) {
                    auto p = Predicate::parse(d.predicate);
                    if (!p) diag(name, "cannot parse predicate '" + d.predicate + "'");
                    else check_var(name, p->variable, "predicate variable");
                } else if constexpr (std::is_same_v<T, ParallelSplitStep>) {
                    if (d.branches.size() < 2) diag(name, "parallel split needs at least two branches");
                    auto j = m.steps.find(d.join);
                    if (j == m.steps.end() || !std::holds_alternative<JoinStep>(j->second)) {
                        diag(name, "join '" + d.join + "' is not a join step");
                    } else {
                        ++join_refs[d.join];
                        const auto arity = std::get<JoinStep>(j->second).arity;
                        if (arity != static_cast<int>(d.branches.size()))
                            diag(d.join, "arity " + std::to_string(arity) + " does not match the " +
                                             std::to_string(d.branches.size()) + " branches of '" + name + "'");
                    }
                } else if constexpr (std::is_same_v<T, JoinStep>) {
                    if (d.arity < 1) diag(name, "arity must be positive");
                }
            },
            def);
    }
    for (const auto& [name, def] : m.steps)
        if (std::holds_alternative<JoinStep>(def) && join_refs[name] != 1)
            diag(name, "join must be named by exactly one parallel split");

    if (m.steps.contains(m.entry_step)) {
        std::set<std::string> seen{m.entry_step};
        std::vector<std::string> stack{m.entry_step};
        while (!stack.empty()) {
            auto cur = stack.back();
            stack.pop_back();
            for (const auto& t : successors(m.steps.at(cur)))
                if (m.steps.contains(t) && seen.insert(t).second) stack.push_back(t);
        }
        for (const auto& [name, def] : m.steps)
            if (!seen.contains(name)) diag(name, "unreachable from entry '" + m.entry_step + "'");
    }
    return diags;
}

json to_json(const TransitionRecord& r) {
    return {{"index", r.index}, {"step", r.step},       {"kind", r.kind},
            {"at", to_epoch_ms(r.at)}, {"outcome", r.outcome}, {"input", r.input}};
}

TransitionRecord transition_from_json(const json& j) {
    return {j.at("index").get<std::uint64_t>(), j.at("step").get<std::string>(), j.at("kind").get<std::string>(),
            from_epoch_ms(j.at("at").get<std::int64_t>()), j.at("outcome").get<std::string>(), j.at("input")};
}

json to_json(const ProcessInstance& p) {
    json history = json::array();
    for (const auto& r : p.history) {
        auto h = to_json(r);
        h["at"] = format_timestamp(r.at);
        history.push_back(std::move(h));
    }
    return {{"instance_id", p.instance_id},
            {"model_id", p.model_id},
            {"version", p.version},
            {"correlation", p.correlation ? json(*p.correlation) : json(nullptr)},
            {"started_at", format_timestamp(p.started_at)},
            {"variables", p.variables},
            {"frontier", p.frontier},
            {"status", to_string(p.status)},
            {"history", history}};
}

json to_json(const HumanTask& t) {
    return {{"task_id", t.task_id},
            {"instance_id", t.instance_id},
            {"step", t.step},
            {"role", t.role},
            {"prompt", t.prompt},
            {"state", to_string(t.state)},
            {"claimant", t.claimant ? json(*t.claimant) : json(nullptr)},
            {"lease_expiry", t.lease_expiry ? json(format_timestamp(*t.lease_expiry)) : json(nullptr)},
            {"outcome", t.outcome ? json(*t.outcome) : json(nullptr)}};
}

// ---------------------------------------------------------------------------
// Instance state machine

namespace {

struct Runtime {
    std::map<std::string, int> arrivals;
    std::map<std::string, Timestamp> activated;
    std::map<std::string, std::string> open_task;
    std::set<std::string> consumed;
    std::optional<InstanceStatus> terminal;
};

struct State {
    ProcessInstance inst;
    Runtime rt;
};

[[noreturn]] void diverged(const std::string& what) { fail(ErrorCode::StorageCorrupt, "history diverges: " + what); }

void enter(const ProcessModel& m, State& s, const std::string& step, Timestamp at) {
    const auto& def = m.steps.at(step);
    if (const auto* j = std::get_if<JoinStep>(&def)) {
        if (++s.rt.arrivals[step] < j->arity) return;
        s.rt.arrivals.erase(step);
    }
    s.inst.frontier.insert(step);
    s.rt.activated[step] = at;
}

void leave(State& s, const std::string& step) {
    s.inst.frontier.erase(step);
    s.rt.activated.erase(step);
    s.rt.open_task.erase(step);
}

void finish(State& s, InstanceStatus status) {
    s.inst.frontier.clear();
    s.rt.activated.clear();
    s.rt.open_task.clear();
    s.rt.arrivals.clear();
    s.rt.terminal = status;
}

bool ready(const ProcessModel& m, const State& s, const std::string& step) {
    const auto& def = m.steps.at(step);
    if (std::holds_alternative<WaitEventStep>(def)) return false;
    if (std::holds_alternative<HumanTaskStep>(def)) return !s.rt.open_task.contains(step);
    return true;
}

std::optional<std::string> next_ready(const ProcessModel& m, const State& s) {
    for (const auto& step : s.inst.frontier)
        if (ready(m, s, step)) return step;
    return std::nullopt;
}

InstanceStatus derive_status(const ProcessModel& m, const State& s) {
    if (s.rt.terminal) return *s.rt.terminal;
    if (next_ready(m, s)) return InstanceStatus::Running;
    if (!s.rt.open_task.empty()) return InstanceStatus::WaitingTask;
    return InstanceStatus::WaitingEvent;
}

State initial_state(const ProcessModel& m, const std::string& id, const std::map<std::string, std::string>& inputs,
                    const std::optional<std::string>& correlation, Timestamp started_at) {
    State s;
    s.inst.instance_id = id;
    s.inst.model_id = m.model_id;
    s.inst.version = m.version;
    s.inst.correlation = correlation;
    s.inst.started_at = started_at;
    s.inst.inputs = inputs;
    s.inst.variables = inputs;
    enter(m, s, m.entry_step, started_at);
    s.inst.status = derive_status(m, s);
    return s;
}

void settle(TransitionRecord& rec, const std::string& computed) {
    if (rec.outcome.empty()) rec.outcome = computed;
    else if (rec.outcome != computed) diverged("step '" + rec.step + "' outcome " + rec.outcome + " vs " + computed);
}

/// Outcomes that only come from outside the scheduler: a task completion or
/// an event/timeout on a wait step.
bool is_external(const ProcessModel& m, const TransitionRecord& rec) {
    const auto it = m.steps.find(rec.step);
    if (it == m.steps.end()) return false;
    if (std::holds_alternative<HumanTaskStep>(it->second)) return rec.outcome == "completed";
    if (std::holds_alternative<WaitEventStep>(it->second)) return rec.outcome == "event" || rec.outcome == "timeout";
    return false;
}

/// Applies one record. Live execution and replay both go through here; for
/// purely derived outcomes an empty `rec.outcome` is filled in, a present one
/// is checked.
void apply(const ProcessModel& m, State& s, TransitionRecord& rec) {
    if (rec.index != s.inst.history.size()) diverged("record index " + std::to_string(rec.index));
    if (!s.inst.frontier.contains(rec.step)) diverged("step '" + rec.step + "' is not on the frontier");
    const auto& def = m.steps.at(rec.step);
    rec.kind = std::string(step_kind(def));
    auto& vars = s.inst.variables;

    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, ServiceInvokeStep>) {
                auto payload = render_template(d.payload_template, vars);
                if (!payload) {
                    settle(rec, "template_error");
                    finish(s, InstanceStatus::Faulted);
                    return;
                }
                if (rec.input.value("request", std::string()) != *payload) diverged("request payload differs");
                if (rec.outcome == "ok") {
                    vars[d.output_var] = rec.input.at("response").template get<std::string>();
                    leave(s, rec.step);
                    enter(m, s, d.next, rec.at);
                } else if (rec.outcome == "fault") {
                    leave(s, rec.step);
                    if (d.on_fault.empty()) finish(s, InstanceStatus::Faulted);
                    else enter(m, s, d.on_fault, rec.at);
                } else {
                    diverged("service_invoke outcome '" + rec.outcome + "'");
                }
            } else if constexpr (std::is_same_v<T, WaitEventStep>) {
                if (rec.outcome == "event") {
                    const auto corr = rec.input.at("correlation_id").template get<std::string>();
                    auto it = vars.find(d.correlation_var);
                    if (it == vars.end() || it->second != corr) diverged("event correlation does not match");
                    vars[d.output_var] = rec.input.at("payload").template get<std::string>();
                    s.rt.consumed.insert(rec.step + "|" + rec.input.at("envelope_id").template get<std::string>());
                    leave(s, rec.step);
                    enter(m, s, d.next, rec.at);
                } else if (rec.outcome == "timeout") {
                    if (!d.timeout) diverged("timeout on a wait without timeout");
                    leave(s, rec.step);
                    enter(m, s, d.on_timeout, rec.at);
                } else {
                    diverged("wait_event outcome '" + rec.outcome + "'");
                }
            } else if constexpr (std::is_same_v<T, HumanTaskStep>) {
                auto open = s.rt.open_task.find(rec.step);
                if (open == s.rt.open_task.end()) {
                    auto prompt = render_template(d.prompt_template, vars);
                    if (!prompt) {
                        settle(rec, "template_error");
                        finish(s, InstanceStatus::Faulted);
                        return;
                    }
                    settle(rec, "task_opened");
                    json input{{"task_id", s.inst.instance_id + ":" + rec.step + ":" + std::to_string(rec.index)},
                               {"prompt", *prompt}};
                    if (rec.input.is_null()) rec.input = input;
                    else if (rec.input != input) diverged("task opening input differs");
                    s.rt.open_task[rec.step] = input["task_id"].template get<std::string>();
                } else {
                    if (rec.outcome != "completed") diverged("human_task outcome '" + rec.outcome + "'");
                    if (rec.input.at("task_id").template get<std::string>() != open->second)
                        diverged("completion for a different task");
                    vars[d.outcome_var] = rec.input.at("outcome").template get<std::string>();
                    leave(s, rec.step);
                    enter(m, s, d.next, rec.at);
                }
            } else if constexpr (std::is_same_v<T, ExclusiveBranchStep>) {
                auto pred = Predicate::parse(d.predicate);
                auto it = pred ? vars.find(pred->variable) : vars.end();
                if (it == vars.end()) {
                    settle(rec, "predicate_error");
                    finish(s, InstanceStatus::Faulted);
                    return;
                }
                const bool taken = pred->evaluate(it->second);
                settle(rec, taken ? "true" : "false");
                leave(s, rec.step);
                enter(m, s, taken ? d.if_true : d.if_false, rec.at);
            } else if constexpr (std::is_same_v<T, ParallelSplitStep>) {
                settle(rec, "split");
                leave(s, rec.step);
                for (const auto& b : d.branches) enter(m, s, b, rec.at);
            } else if constexpr (std::is_same_v<T, JoinStep>) {
                settle(rec, "joined");
                leave(s, rec.step);
                enter(m, s, d.next, rec.at);
            } else {
                settle(rec, std::string(to_string(d.status)));
                finish(s, d.status);
            }
        },
        def);

    s.inst.history.push_back(rec);
    s.inst.status = derive_status(m, s);
}

/// Replay-time scheduling check: internal steps must be exactly what the
/// scheduler would pick next; external completions must target a blocked step.
void check_schedule(const ProcessModel& m, const State& s, const TransitionRecord& rec) {
    if (s.rt.terminal) diverged("record after termination");
    if (is_external(m, rec)) {
        if (!s.inst.frontier.contains(rec.step)) diverged("external input for inactive step '" + rec.step + "'");
        if (ready(m, s, rec.step)) diverged("external input for a step that was not blocked");
        return;
    }
    auto expected = next_ready(m, s);
    if (!expected || *expected != rec.step)
        diverged("scheduler would run '" + expected.value_or("<nothing>") + "' but history has '" + rec.step + "'");
}

Outcome audit_outcome(const TransitionRecord& rec) {
    static const std::set<std::string> bad{"fault", "template_error", "predicate_error", "faulted", "timeout"};
    return bad.contains(rec.outcome) ? Outcome::Fault : Outcome::Ok;
}

}  // namespace

ProcessInstance replay_instance(const ProcessModel& model, const std::string& instance_id,
                                const std::map<std::string, std::string>& inputs,
                                const std::optional<std::string>& correlation, Timestamp started_at,
                                const std::vector<TransitionRecord>& history) {
    auto s = initial_state(model, instance_id, inputs, correlation, started_at);
    for (auto rec : history) {
        check_schedule(model, s, rec);
        apply(model, s, rec);
    }
    return s.inst;
}

// ---------------------------------------------------------------------------
// Engine

struct Engine::Slot {
    std::mutex mu;
    std::shared_ptr<const ProcessModel> model;
    State state;
};

Engine::Engine(std::unique_ptr<AppendLog> store, AuditLog& audit, const Clock& clock, Invoker invoker, RoleCheck roles,
               Millis lease)
    : store_(std::move(store)),
      audit_(audit),
      clock_(clock),
      invoker_(std::move(invoker)),
      roles_(std::move(roles)),
      lease_(lease) {
    load();
}

Engine::~Engine() = default;

void Engine::load() {
    store_->replay([this](const json& j, std::size_t) {
        const auto type = j.at("t").get<std::string>();
        if (type == "model") {
            auto m = process_model_from_json(j.at("model"));
            auto& versions = models_[m.model_id];
            if (m.version != static_cast<int>(versions.size()) + 1) fail(ErrorCode::StorageCorrupt, "model version gap");
            versions.push_back(std::move(m));
        } else if (type == "start") {
            const auto model_id = j.at("model_id").get<std::string>();
            const auto version = j.at("version").get<int>();
            auto slot = std::make_unique<Slot>();
            slot->model = std::make_shared<const ProcessModel>(models_.at(model_id).at(version - 1));
            std::optional<std::string> corr;
            if (!j.at("correlation").is_null()) corr = j.at("correlation").get<std::string>();
            const auto id = j.at("instance_id").get<std::string>();
            slot->state = initial_state(*slot->model, id, j.at("inputs").get<std::map<std::string, std::string>>(),
                                        corr, from_epoch_ms(j.at("started_at").get<std::int64_t>()));
            if (corr) by_correlation_[{model_id, *corr}] = id;
            instances_.emplace(id, std::move(slot));
        } else if (type == "transition") {
            auto& slot = *instances_.at(j.at("instance_id").get<std::string>());
            auto rec = transition_from_json(j.at("record"));
            check_schedule(*slot.model, slot.state, rec);
            apply(*slot.model, slot.state, rec);
            ++transitions_;
            if (rec.outcome == "task_opened") {
                const auto& def = std::get<HumanTaskStep>(slot.model->steps.at(rec.step));
                HumanTask t;
                t.task_id = rec.input.at("task_id").get<std::string>();
                t.instance_id = slot.state.inst.instance_id;
                t.step = rec.step;
                t.role = def.role;
                t.prompt = rec.input.at("prompt").get<std::string>();
                tasks_[t.task_id] = t;
            } else if (rec.outcome == "completed" && rec.kind == "human_task") {
                auto& t = tasks_.at(rec.input.at("task_id").get<std::string>());
                t.state = TaskState::Completed;
                t.outcome = rec.input.at("outcome").get<std::string>();
            }
        } else if (type == "claim") {
            auto& t = tasks_.at(j.at("task_id").get<std::string>());
            t.state = TaskState::Claimed;
            t.claimant = j.at("user_id").get<std::string>();
            t.lease_expiry = from_epoch_ms(j.at("lease_expiry").get<std::int64_t>());
            ++claim_count_[t.task_id];
        } else {
            fail(ErrorCode::StorageCorrupt, "unknown instance log record type '" + type + "'");
        }
    });
}

int Engine::register_model(ProcessModel model) {
    if (auto diags = validate_model(model); !diags.empty()) {
        std::string msg;
        for (const auto& d : diags) msg += (msg.empty() ? "" : "; ") + d;
        fail(ErrorCode::ValidationFailed, msg);
    }
    std::unique_lock lock(models_mu_);
    auto& versions = models_[model.model_id];
    model.version = static_cast<int>(versions.size()) + 1;
    store_->append({{"t", "model"}, {"model", to_json(model)}});
    versions.push_back(std::move(model));
    return versions.back().version;
}

int Engine::ensure_model(ProcessModel model) {
    {
        std::shared_lock lock(models_mu_);
        auto it = models_.find(model.model_id);
        if (it != models_.end() && !it->second.empty()) {
            auto latest = to_json(it->second.back());
            latest.erase("version");
            auto candidate = to_json(model);
            candidate.erase("version");
            if (latest == candidate) return it->second.back().version;
        }
    }
    return register_model(std::move(model));
}

ProcessModel Engine::model(const std::string& model_id, std::optional<int> version) const {
    std::shared_lock lock(models_mu_);
    auto it = models_.find(model_id);
    if (it == models_.end() || it->second.empty()) fail(ErrorCode::UnknownModel, model_id);
    if (!version) return it->second.back();
    if (*version < 1 || *version > static_cast<int>(it->second.size()))
        fail(ErrorCode::UnknownModel, model_id + " v" + std::to_string(*version));
    return it->second.at(*version - 1);
}

bool Engine::has_model(const std::string& model_id) const {
    std::shared_lock lock(models_mu_);
    return models_.contains(model_id);
}

std::vector<ProcessModel> Engine::models() const {
    std::shared_lock lock(models_mu_);
    std::vector<ProcessModel> out;
    for (const auto& [id, versions] : models_)
        if (!versions.empty()) out.push_back(versions.back());
    return out;
}

Engine::Slot& Engine::slot(const std::string& instance_id) const {
    std::shared_lock lock(instances_mu_);
    auto it = instances_.find(instance_id);
    if (it == instances_.end()) fail(ErrorCode::UnknownInstance, instance_id);
    return *it->second;
}

std::string Engine::start_instance(const std::string& model_id, std::optional<int> version,
                                   const std::map<std::string, std::string>& inputs,
                                   std::optional<std::string> correlation) {
    auto m = std::make_shared<const ProcessModel>(model(model_id, version));
    for (const auto& [name, value] : inputs)
        if (!m->variables.contains(name)) fail(ErrorCode::MissingInput, "'" + name + "' is not a declared variable");
    for (const auto& name : m->required_inputs())
        if (!inputs.contains(name)) fail(ErrorCode::MissingInput, "required input '" + name + "' is absent");
    if (correlation && correlation->empty()) correlation.reset();

    // Deterministic for correlated starts, so a start retried after a crash
    // lands on the same instance id and audit key.
    const auto id = correlation ? stable_uuid("instance/" + model_id + "/" + *correlation) : new_uuid();
    const auto started_at = clock_.now();
    Slot* created = nullptr;
    {
        std::unique_lock lock(instances_mu_);
        if (correlation) {
            auto existing = by_correlation_.find({model_id, *correlation});
            if (existing != by_correlation_.end()) return existing->second;
        }
        auto s = std::make_unique<Slot>();
        s->model = m;
        s->state = initial_state(*m, id, inputs, correlation, started_at);
        audit_.record(AuditCategory::OrchestrationTransition, id, "engine", "start", Outcome::Ok,
                      m->model_id + " v" + std::to_string(m->version), id + "/start");
        store_->append({{"t", "start"},
                        {"instance_id", id},
                        {"model_id", m->model_id},
                        {"version", m->version},
                        {"inputs", inputs},
                        {"correlation", correlation ? json(*correlation) : json(nullptr)},
                        {"started_at", to_epoch_ms(started_at)}});
        created = s.get();
        std::unique_lock slock(created->mu);
        instances_.emplace(id, std::move(s));
        if (correlation) by_correlation_[{model_id, *correlation}] = id;
        lock.unlock();
        run_pass(*created);
    }
    return id;
}

void Engine::commit(Slot& s, TransitionRecord rec) {
    rec.index = s.state.inst.history.size();
    State next = s.state;
    apply(*s.model, next, rec);

    const auto& id = s.state.inst.instance_id;
    const auto key = id + "/" + std::to_string(rec.index);
    audit_.record(AuditCategory::OrchestrationTransition, id, "engine", rec.step, audit_outcome(rec),
                  rec.kind + ": " + rec.outcome, key + "/transition");
    if (rec.outcome == "template_error" || rec.outcome == "predicate_error")
        audit_.record(AuditCategory::Error, id, "engine", rec.step, Outcome::Fault,
                      rec.input.is_object() ? rec.input.value("error", rec.outcome) : rec.outcome, key + "/error");
    if (rec.outcome == "task_opened")
        audit_.record(AuditCategory::TaskEvent, id, "engine", rec.step, Outcome::Ok,
                      "opened " + rec.input.at("task_id").get<std::string>(), key + "/task");
    store_->append({{"t", "transition"}, {"instance_id", id}, {"record", to_json(rec)}});

    s.state = std::move(next);
    ++transitions_;

    std::lock_guard lock(tasks_mu_);
    if (rec.outcome == "task_opened") {
        HumanTask t;
        t.task_id = rec.input.at("task_id").get<std::string>();
        t.instance_id = id;
        t.step = rec.step;
        t.role = std::get<HumanTaskStep>(s.model->steps.at(rec.step)).role;
        t.prompt = rec.input.at("prompt").get<std::string>();
        tasks_[t.task_id] = std::move(t);
    } else if (rec.kind == "human_task" && rec.outcome == "completed") {
        auto& t = tasks_.at(rec.input.at("task_id").get<std::string>());
        t.state = TaskState::Completed;
        t.outcome = rec.input.at("outcome").get<std::string>();
    }
}

void Engine::run_pass(Slot& s) {
    // Guards against models that loop through internal steps forever.
    constexpr int kMaxStepsPerPass = 10'000;
    for (int i = 0; i < kMaxStepsPerPass; ++i) {
        auto step = next_ready(*s.model, s.state);
        if (!step) return;
        TransitionRecord rec;
        rec.step = *step;
        rec.at = clock_.now();
        if (const auto* inv = std::get_if<ServiceInvokeStep>(&s.model->steps.at(*step))) {
            std::string missing;
            auto payload = render_template(inv->payload_template, s.state.inst.variables, &missing);
            if (!payload) {
                rec.outcome = "template_error";
                rec.input = {{"error", "unknown variable '" + missing + "' in payload template"}};
            } else {
                auto result = invoker_(s.state.inst, *step, inv->destination, *payload);
                if (result.ok) {
                    rec.outcome = "ok";
                    rec.input = {{"request", *payload}, {"response", result.text}};
                } else {
                    rec.outcome = "fault";
                    rec.input = {{"request", *payload}, {"fault_code", result.fault_code}, {"detail", result.text}};
                }
            }
        } else if (const auto* ht = std::get_if<HumanTaskStep>(&s.model->steps.at(*step))) {
            std::string missing;
            if (!render_template(ht->prompt_template, s.state.inst.variables, &missing))
                rec.input = {{"error", "unknown variable '" + missing + "' in prompt template"}};
        } else if (const auto* br = std::get_if<ExclusiveBranchStep>(&s.model->steps.at(*step))) {
            auto pred = Predicate::parse(br->predicate);
            if (pred && !s.state.inst.variables.contains(pred->variable))
                rec.input = {{"error", "predicate variable '" + pred->variable + "' has no value"}};
        }
        commit(s, std::move(rec));
    }
}

void Engine::fire_timeouts(Slot& s) {
    const auto now = clock_.now();
    const auto frontier = s.state.inst.frontier;
    for (const auto& step : frontier) {
        const auto* w = std::get_if<WaitEventStep>(&s.model->steps.at(step));
        if (!w || !w->timeout || !s.state.inst.frontier.contains(step)) continue;
        if (now < s.state.rt.activated.at(step) + *w->timeout) continue;
        TransitionRecord rec;
        rec.step = step;
        rec.at = now;
        rec.outcome = "timeout";
        commit(s, std::move(rec));
    }
}

ProcessInstance Engine::advance(const std::string& instance_id) {
    auto& s = slot(instance_id);
    std::lock_guard lock(s.mu);
    if (!s.state.rt.terminal) {
        fire_timeouts(s);
        run_pass(s);
    }
    return s.state.inst;
}

std::vector<std::string> Engine::deliver_event(const std::string& topic, const Envelope& event) {
    std::vector<std::string> advanced;
    if (!event.correlation_id) return advanced;
    std::vector<Slot*> slots;
    {
        std::shared_lock lock(instances_mu_);
        for (auto& [id, s] : instances_) slots.push_back(s.get());
    }
    for (auto* s : slots) {
        std::lock_guard lock(s->mu);
        if (s->state.rt.terminal) continue;
        bool hit = false;
        const auto frontier = s->state.inst.frontier;
        for (const auto& step : frontier) {
            const auto* w = std::get_if<WaitEventStep>(&s->model->steps.at(step));
            if (!w || w->topic != topic || !s->state.inst.frontier.contains(step)) continue;
            auto var = s->state.inst.variables.find(w->correlation_var);
            if (var == s->state.inst.variables.end() || var->second != *event.correlation_id) continue;
            if (s->state.rt.consumed.contains(step + "|" + event.envelope_id)) continue;
            const auto& id = s->state.inst.instance_id;
            audit_.record(AuditCategory::Deliver, id, event.sender.admin_id, topic, Outcome::Ok,
                          "event " + event.envelope_id + " to step " + step,
                          id + "/" + std::to_string(s->state.inst.history.size()) + "/deliver");
            TransitionRecord rec;
            rec.step = step;
            rec.at = clock_.now();
            rec.outcome = "event";
            rec.input = {{"envelope_id", event.envelope_id},
                         {"correlation_id", *event.correlation_id},
                         {"payload", event.payload_text()}};
            commit(*s, std::move(rec));
            hit = true;
        }
        if (hit) {
            run_pass(*s);
            advanced.push_back(s->state.inst.instance_id);
        }
    }
    return advanced;
}

ProcessInstance Engine::instance_state(const std::string& instance_id) const {
    auto& s = slot(instance_id);
    std::lock_guard lock(s.mu);
    return s.state.inst;
}

std::vector<std::string> Engine::instance_ids() const {
    std::shared_lock lock(instances_mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : instances_) out.push_back(id);
    return out;
}

std::vector<HumanTask> Engine::list_tasks(const TaskFilter& filter) const {
    const auto now = clock_.now();
    std::lock_guard lock(tasks_mu_);
    std::vector<HumanTask> out;
    for (auto [key, t] : tasks_) {
        if (t.state == TaskState::Claimed && t.lease_expiry && *t.lease_expiry <= now) {
            t.state = TaskState::Open;
            t.claimant.reset();
            t.lease_expiry.reset();
        }
        if (filter.role && t.role != *filter.role) continue;
        if (filter.state && t.state != *filter.state) continue;
        if (filter.instance_id && t.instance_id != *filter.instance_id) continue;
        out.push_back(std::move(t));
    }
    return out;
}

HumanTask Engine::claim_task(const std::string& task_id, const std::string& user_id) {
    std::string instance_id;
    {
        std::lock_guard lock(tasks_mu_);
        auto it = tasks_.find(task_id);
        if (it == tasks_.end()) fail(ErrorCode::UnknownTask, task_id);
        instance_id = it->second.instance_id;
    }
    // Instance lock first, same order as complete_task and the engine.
    auto& s = slot(instance_id);
    std::lock_guard ilock(s.mu);
    if (s.state.rt.terminal) fail(ErrorCode::InstanceFinished, instance_id);

    std::lock_guard lock(tasks_mu_);
    auto& t = tasks_.at(task_id);
    const auto now = clock_.now();
    if (t.state == TaskState::Completed) fail(ErrorCode::AlreadyCompleted, task_id);
    if (t.state == TaskState::Claimed && t.lease_expiry && *t.lease_expiry > now)
        fail(ErrorCode::AlreadyClaimed, task_id + " is held by another claim");
    if (!roles_ || !roles_(user_id, t.role)) fail(ErrorCode::RoleDenied, user_id + " lacks role " + t.role);
    const auto expiry = now + lease_;
    auto& claims = claim_count_[task_id];
    audit_.record(AuditCategory::TaskEvent, t.instance_id, user_id, t.step, Outcome::Ok, "claimed " + task_id,
                  task_id + "/claim/" + std::to_string(claims));
    store_->append({{"t", "claim"}, {"task_id", task_id}, {"user_id", user_id}, {"lease_expiry", to_epoch_ms(expiry)}});
    ++claims;
    t.state = TaskState::Claimed;
    t.claimant = user_id;
    t.lease_expiry = expiry;
    return t;
}

ProcessInstance Engine::complete_task(const std::string& task_id, const std::string& user_id,
                                      const std::string& outcome) {
    std::string instance_id;
    {
        std::lock_guard lock(tasks_mu_);
        auto it = tasks_.find(task_id);
        if (it == tasks_.end()) fail(ErrorCode::UnknownTask, task_id);
        instance_id = it->second.instance_id;
    }
    auto& s = slot(instance_id);
    std::lock_guard ilock(s.mu);
    std::string step;
    {
        std::lock_guard lock(tasks_mu_);
        const auto& t = tasks_.at(task_id);
        if (t.state == TaskState::Completed) fail(ErrorCode::AlreadyCompleted, task_id);
        if (t.state != TaskState::Claimed || t.claimant != user_id)
            fail(ErrorCode::NotClaimant, user_id + " does not hold " + task_id);
        step = t.step;
    }
    if (s.state.rt.terminal) fail(ErrorCode::InstanceFinished, instance_id);
    audit_.record(AuditCategory::TaskEvent, instance_id, user_id, step, Outcome::Ok, "completed " + task_id,
                  instance_id + "/" + std::to_string(s.state.inst.history.size()) + "/complete");
    TransitionRecord rec;
    rec.step = step;
    rec.at = clock_.now();
    rec.outcome = "completed";
    rec.input = {{"task_id", task_id}, {"user_id", user_id}, {"outcome", outcome}};
    commit(s, std::move(rec));
    run_pass(s);
    return s.state.inst;
}

void Engine::resume_all() {
    for (const auto& id : instance_ids()) {
        auto& s = slot(id);
        std::lock_guard lock(s.mu);
        if (!s.state.rt.terminal) run_pass(s);
    }
}

std::uint64_t Engine::transitions() const { return transitions_.load(); }

}  // namespace ssc
