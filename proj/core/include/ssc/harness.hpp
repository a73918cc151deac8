// SPDX-License-Identifier: Apache-2.0
//
// Simulated administrations: in-process applicative back-ends with
// deterministic handlers, used by scenarios, demos and tests.
#pragma once

#include "ssc/cooperation.hpp"
#include "ssc/crypto.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>

namespace ssc {

enum class HandlerKind { Echo, Template, Fault };

struct HandlerSpec {
    HandlerKind kind = HandlerKind::Echo;
    /// For Template: `${request}` is the request payload, `${admin}` the
    /// answering administration, `${service}` the service id.
    std::string text;
    /// Delay before answering; used to exercise timeouts.
    Millis latency{0};
};

nlohmann::json to_json(const HandlerSpec& h);
HandlerSpec handler_spec_from_json(const nlohmann::json& j);

struct SimulatedAdministration {
    std::string admin_id;
    std::string key_id;
    KeyPair keys;
    std::map<std::string, HandlerSpec> services;
};

/// Keys derive from `seed` and the admin id, so a restarted harness presents
/// the same identity.
SimulatedAdministration make_simulated_admin(const std::string& admin_id, const std::string& seed,
                                             std::map<std::string, HandlerSpec> services);

/// Serves every service of one administration; responses are signed with its key.
class SimulatedBackend : public Backend {
public:
    SimulatedBackend(SimulatedAdministration admin, const KeyDirectory& keys, const Clock& clock)
        : admin_(std::move(admin)), keys_(keys), clock_(clock) {}

    Envelope handle(const Envelope& request) override;
    const SimulatedAdministration& admin() const { return admin_; }

private:
    SimulatedAdministration admin_;
    const KeyDirectory& keys_;
    const Clock& clock_;
};

}  // namespace ssc
