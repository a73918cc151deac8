// SPDX-License-Identifier: Apache-2.0
//
// One-stop scenarios: seed data plus a script of actor actions executed
// through the public API, followed by assertions on the outcome.
#pragma once

#include "ssc/api.hpp"
#include "ssc/gateway.hpp"
#include "ssc/harness.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ssc {

struct ScenarioAdmin {
    std::string admin_id;
    std::map<std::string, HandlerSpec> services;
};

struct Scenario {
    std::string name;
    /// Key derivation seed for the simulated administrations.
    std::string seed = "ssc-harness";
    std::vector<ScenarioAdmin> administrations;
    std::vector<std::string> topics;
    nlohmann::json catalog = nlohmann::json::object();
    nlohmann::json users = nlohmann::json::array();
    nlohmann::json models = nlohmann::json::array();
    nlohmann::json script = nlohmann::json::array();
    nlohmann::json assertions = nlohmann::json::array();
    /// Directory that golden files are resolved against.
    std::filesystem::path base_dir;
};

/// Throws ScenarioError on malformed documents or dangling references.
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& file);

/// Installs administrations, topics, models, catalog and users. Idempotent.
void seed_scenario(Gateway& gateway, const Scenario& scenario);

struct AssertionResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ScenarioReport {
    std::string name;
    bool pass = true;
    std::vector<AssertionResult> assertions;
    /// Audit trace per named instance.
    std::map<std::string, std::vector<AuditRecord>> traces;
    std::map<std::string, std::string> bindings;
};

nlohmann::json to_json(const ScenarioReport& r);

/// The comparable projection of a trace record used by golden files.
nlohmann::json trace_signature(const AuditRecord& r);

/// Executes a script step by step. Actions only use `client`; bindings
/// (tokens, instance ids) survive across gateway restarts.
class ScriptRunner {
public:
    ScriptRunner(const Scenario& scenario, GatewayClient& client);

    std::size_t steps() const { return scenario_.script.size(); }
    /// Throws ScenarioError when the step cannot be carried out.
    void run_step(std::size_t index);
    void run_all();
    ScenarioReport evaluate();

    void set_client(GatewayClient& client) { client_ = &client; }
    const std::map<std::string, std::string>& bindings() const { return bindings_; }

private:
    nlohmann::json call(const std::string& method, const std::string& path, const nlohmann::json& body,
                        const std::string& token_name, std::initializer_list<int> tolerated = {});
    const std::string& binding(const nlohmann::json& step, const char* key) const;
    std::string task_for(const std::string& token, const std::string& instance, const std::string& step);
    const SimulatedAdministration& admin(const std::string& admin_id) const;

    const Scenario& scenario_;
    GatewayClient* client_;
    std::map<std::string, std::string> bindings_;
    std::map<std::string, SimulatedAdministration> admins_;
};

/// Seeds `gateway`, runs the script in-process and evaluates every assertion.
ScenarioReport run_scenario(Gateway& gateway, const Scenario& scenario);

}  // namespace ssc
