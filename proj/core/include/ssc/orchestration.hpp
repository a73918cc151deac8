// SPDX-License-Identifier: Apache-2.0
//
// Process orchestration and workflow. A registered ProcessModel is a graph of
// steps; a ProcessInstance walks it. Every executed step appends one
// TransitionRecord carrying whatever came from outside (service response,
// event, task outcome), so folding the history over the model rebuilds the
// instance exactly. Recovery after a restart is that same fold.
#pragma once

#include "ssc/audit.hpp"
#include "ssc/envelope.hpp"
#include "ssc/storage.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

namespace ssc {

enum class InstanceStatus { Running, WaitingEvent, WaitingTask, Completed, Faulted };
std::string_view to_string(InstanceStatus s) noexcept;
std::optional<InstanceStatus> parse_instance_status(std::string_view s) noexcept;

struct ServiceInvokeStep {
    Destination destination;
    std::string payload_template;
    std::string output_var;
    /// Empty: a fault ends the instance as faulted.
    std::string on_fault;
    std::string next;
};

struct WaitEventStep {
    std::string topic;
    std::string correlation_var;
    std::string output_var;
    /// Unset waits forever.
    std::optional<Millis> timeout;
    std::string on_timeout;
    std::string next;
};

struct HumanTaskStep {
    std::string role;
    std::string prompt_template;
    std::string outcome_var;
    std::string next;
};

struct ExclusiveBranchStep {
    /// `var OP literal`, see predicate.hpp
    std::string predicate;
    std::string if_true;
    std::string if_false;
};

struct ParallelSplitStep {
    std::vector<std::string> branches;
    std::string join;
};

struct JoinStep {
    int arity = 2;
    std::string next;
};

struct TerminateStep {
    InstanceStatus status = InstanceStatus::Completed;
};

using StepDef = std::variant<ServiceInvokeStep, WaitEventStep, HumanTaskStep, ExclusiveBranchStep, ParallelSplitStep,
                             JoinStep, TerminateStep>;

std::string_view step_kind(const StepDef& step) noexcept;

struct ProcessModel {
    std::string model_id;
    int version = 0;
    std::string entry_step;
    std::map<std::string, StepDef> steps;
    std::set<std::string> variables;

    /// Declared variables that no step writes; they must be supplied at start.
    std::set<std::string> required_inputs() const;
};

nlohmann::json to_json(const ProcessModel& m);
/// Throws ValidationFailed on structural problems in the document itself.
ProcessModel process_model_from_json(const nlohmann::json& j);

/// Step-level diagnostics; empty means the model is valid.
std::vector<std::string> validate_model(const ProcessModel& m);

struct TransitionRecord {
    std::uint64_t index = 0;
    std::string step;
    std::string kind;
    Timestamp at{};
    /// ok | fault | template_error | event | timeout | task_opened | completed |
    /// true | false | predicate_error | split | joined | faulted
    std::string outcome;
    /// External input consumed by this step (null for purely internal steps).
    nlohmann::json input;

    bool operator==(const TransitionRecord&) const = default;
};

nlohmann::json to_json(const TransitionRecord& r);
TransitionRecord transition_from_json(const nlohmann::json& j);

struct ProcessInstance {
    std::string instance_id;
    std::string model_id;
    int version = 0;
    std::optional<std::string> correlation;
    Timestamp started_at{};
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> variables;
    std::set<std::string> frontier;
    InstanceStatus status = InstanceStatus::Running;
    std::vector<TransitionRecord> history;
};

nlohmann::json to_json(const ProcessInstance& p);

enum class TaskState { Open, Claimed, Completed };
std::string_view to_string(TaskState s) noexcept;
std::optional<TaskState> parse_task_state(std::string_view s) noexcept;

struct HumanTask {
    std::string task_id;
    std::string instance_id;
    std::string step;
    std::string role;
    std::string prompt;
    TaskState state = TaskState::Open;
    std::optional<std::string> claimant;
    std::optional<Timestamp> lease_expiry;
    std::optional<std::string> outcome;
};

nlohmann::json to_json(const HumanTask& t);

struct TaskFilter {
    std::optional<std::string> role;
    std::optional<TaskState> state;
    std::optional<std::string> instance_id;
};

struct InvokeResult {
    bool ok = false;
    /// Response payload text when ok, fault detail otherwise.
    std::string text;
    std::string fault_code;
};

/// Re-executes `history` against `model` from the given start, checking at
/// each record that the scheduler would have chosen the same step and that
/// every derived outcome matches. Throws Error{StorageCorrupt} on divergence.
ProcessInstance replay_instance(const ProcessModel& model, const std::string& instance_id,
                                const std::map<std::string, std::string>& inputs,
                                const std::optional<std::string>& correlation, Timestamp started_at,
                                const std::vector<TransitionRecord>& history);

class Engine {
public:
    using Invoker = std::function<InvokeResult(const ProcessInstance& instance, const std::string& step,
                                               const Destination& destination, const std::string& payload)>;
    using RoleCheck = std::function<bool(const std::string& user_id, const std::string& role)>;

    static constexpr Millis kDefaultLease = std::chrono::minutes(15);

    Engine(std::unique_ptr<AppendLog> store, AuditLog& audit, const Clock& clock, Invoker invoker, RoleCheck roles,
           Millis lease = kDefaultLease);
    ~Engine();

    /// Validates and stores a new version. Throws ValidationFailed.
    int register_model(ProcessModel model);
    /// Registers only if the latest stored version differs in content.
    int ensure_model(ProcessModel model);
    ProcessModel model(const std::string& model_id, std::optional<int> version = std::nullopt) const;
    bool has_model(const std::string& model_id) const;
    /// Latest version of every model.
    std::vector<ProcessModel> models() const;

    /// With a correlation, starting again for the same model returns the
    /// existing instance instead of creating a second one.
    std::string start_instance(const std::string& model_id, std::optional<int> version,
                               const std::map<std::string, std::string>& inputs,
                               std::optional<std::string> correlation = std::nullopt);
    ProcessInstance advance(const std::string& instance_id);
    std::vector<std::string> deliver_event(const std::string& topic, const Envelope& event);
    ProcessInstance instance_state(const std::string& instance_id) const;
    std::vector<std::string> instance_ids() const;

    std::vector<HumanTask> list_tasks(const TaskFilter& filter = {}) const;
    HumanTask claim_task(const std::string& task_id, const std::string& user_id);
    ProcessInstance complete_task(const std::string& task_id, const std::string& user_id, const std::string& outcome);

    /// Runs a pass on every instance that still has ready work (after recovery).
    void resume_all();

    std::uint64_t transitions() const;
    bool healthy() const { return store_->healthy(); }

private:
    struct Slot;
    Slot& slot(const std::string& instance_id) const;
    void load();
    void run_pass(Slot& s);
    void commit(Slot& s, TransitionRecord record);
    void fire_timeouts(Slot& s);

    std::unique_ptr<AppendLog> store_;
    AuditLog& audit_;
    const Clock& clock_;
    Invoker invoker_;
    RoleCheck roles_;
    Millis lease_;

    mutable std::shared_mutex models_mu_;
    std::map<std::string, std::vector<ProcessModel>> models_;

    mutable std::shared_mutex instances_mu_;
    std::map<std::string, std::unique_ptr<Slot>> instances_;
    std::map<std::pair<std::string, std::string>, std::string> by_correlation_;

    mutable std::mutex tasks_mu_;
    std::map<std::string, HumanTask> tasks_;
    std::map<std::string, int> claim_count_;
    std::atomic<std::uint64_t> transitions_{0};
};

}  // namespace ssc
