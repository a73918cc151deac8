// SPDX-License-Identifier: Apache-2.0
//
// The deployable service: composes every module over one storage directory,
// recovers durable state at construction and exposes a health summary.
#pragma once

#include "ssc/audit.hpp"
#include "ssc/cooperation.hpp"
#include "ssc/crypto.hpp"
#include "ssc/envelope.hpp"
#include "ssc/eventbus.hpp"
#include "ssc/harness.hpp"
#include "ssc/identity.hpp"
#include "ssc/orchestration.hpp"
#include "ssc/registry.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ssc {

struct GatewayConfig {
    std::string listen_host = "127.0.0.1";
    /// 0 picks a free port; see port_file.
    int listen_port = 8080;
    /// When set, the bound port is written here once listening.
    std::string port_file;
    /// Empty keeps everything in memory.
    std::filesystem::path storage;
    bool fsync = false;
    /// Framework signing key: derived from a seed, read from a file (base64
    /// secret key), or generated once and kept in the storage directory.
    std::string framework_key_seed;
    std::string framework_key_file;
    std::string key_directory_file;
    Millis sync_timeout = std::chrono::seconds(5);
    Millis task_lease = Engine::kDefaultLease;
    Millis token_ttl = Identity::kDefaultTtl;
    std::size_t retention_cap = EventBus::kDefaultRetentionCap;
    PasswordHashParams password_params = PasswordHashParams::interactive();
    std::vector<std::string> cors_origins;
    /// Seed documents applied idempotently at startup.
    std::string seed_catalog;
    std::string seed_users;
    std::string seed_models;
    /// Scenario whose administrations and seed data are installed at startup.
    std::string harness_scenario;
    /// Key derivation seed for simulated administrations.
    std::string harness_seed = "ssc-harness";

    /// Unknown keys are rejected. Relative paths resolve against `base_dir`.
    static GatewayConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static GatewayConfig load(const std::filesystem::path& file);
};

class Gateway {
public:
    /// Throws ConfigError, or StorageCorrupt naming the offending record.
    explicit Gateway(GatewayConfig config, const Clock* clock = nullptr);
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    const GatewayConfig& config() const { return config_; }
    const Clock& clock() const { return *clock_; }
    const FrameworkIdentity& framework() const { return framework_; }

    AuditLog& audit() { return *audit_; }
    KeyDirectory& keys() { return keys_; }
    PortTable& ports() { return *ports_; }
    Cooperation& cooperation() { return *cooperation_; }
    EventBus& events() { return *events_; }
    Engine& engine() { return *engine_; }
    Registry& registry() { return *registry_; }
    Identity& identity() { return *identity_; }

    /// Adds the administration's key and an applicative port per service.
    /// Throws DuplicatePort when one of its services is already routed.
    void spawn_simulated_admin(const SimulatedAdministration& admin);
    /// floor(admin_count * participation_ratio) administrations with a
    /// standard service set and taxonomy. Idempotent for already online ones.
    std::vector<std::string> seed_demo(int admin_count, double participation_ratio);

    /// {"nodes":[...],"services":[...]}
    void seed_catalog(const nlohmann::json& doc);
    /// [{"user_id","password","public_key"?,"roles","static_profile"}]
    void seed_users(const nlohmann::json& doc);
    /// [model documents]
    void seed_models(const nlohmann::json& doc);

    /// Runs pending work of recovered instances; call once the admins that
    /// serve them are spawned.
    void resume();

    nlohmann::json healthcheck() const;

    /// Signed on behalf of the framework (portal requests, orchestration).
    Envelope framework_envelope(const Destination& to, Profile profile, MessageKind kind, std::string payload,
                                std::optional<std::string> correlation);

    /// Number of administrations `seed_demo` spawns for the given knob.
    static int participating_admins(int admin_count, double participation_ratio);

private:
    std::unique_ptr<AppendLog> open_store(const std::string& name) const;
    void load_framework_key();
    InvokeResult invoke(const ProcessInstance& instance, const Destination& to, const std::string& payload);

    GatewayConfig config_;
    std::unique_ptr<Clock> owned_clock_;
    const Clock* clock_;
    FrameworkIdentity framework_;
    KeyDirectory keys_;
    std::unique_ptr<AuditLog> audit_;
    std::unique_ptr<PortTable> ports_;
    std::unique_ptr<Cooperation> cooperation_;
    std::unique_ptr<EventBus> events_;
    std::unique_ptr<Engine> engine_;
    std::unique_ptr<Registry> registry_;
    std::unique_ptr<Identity> identity_;
};

}  // namespace ssc
