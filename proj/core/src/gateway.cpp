// SPDX-License-Identifier: Apache-2.0
#include "ssc/gateway.hpp"

#include "ssc/codec.hpp"
#include "ssc/error.hpp"
#include "ssc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <sys/stat.h>
#include <unistd.h>

namespace ssc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) fail(ErrorCode::ConfigError, "cannot read " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigError, file.string() + ": " + e.what());
    }
}

Millis positive_ms(const json& j, const char* key, Millis fallback) {
    if (!j.contains(key)) return fallback;
    const auto v = j.at(key).get<std::int64_t>();
    if (v <= 0) fail(ErrorCode::ConfigError, std::string(key) + " must be positive");
    return Millis{v};
}

const std::vector<std::pair<std::string, HandlerSpec>>& standard_services() {
    static const std::vector<std::pair<std::string, HandlerSpec>> services{
        {"anagrafe.certificate", {HandlerKind::Template, "certificate for ${request} issued by ${admin}", Millis{0}}},
        {"protocollo.submit", {HandlerKind::Echo, "", Millis{0}}},
    };
    return services;
}

}  // namespace

GatewayConfig GatewayConfig::from_json(const json& j, const fs::path& base_dir) {
    static const std::set<std::string> known{
        "listen",           "port_file",       "storage",         "fsync",          "framework_key_seed",
        "framework_key_file", "key_directory_file", "sync_timeout_ms", "task_lease_ms", "token_ttl_ms",
        "retention_cap",    "password_hash",   "cors_origins",    "seed_catalog",   "seed_users",
        "seed_models",      "harness_scenario", "harness_seed"};
    if (!j.is_object()) fail(ErrorCode::ConfigError, "config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!known.contains(k)) fail(ErrorCode::ConfigError, "unknown config key '" + k + "'");

    auto path = [&](const char* key) -> std::string {
        if (!j.contains(key)) return {};
        fs::path p = j.at(key).get<std::string>();
        if (p.empty()) return {};
        return (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
    };

    GatewayConfig c;
    try {
        if (j.contains("listen")) {
            const auto listen = j.at("listen").get<std::string>();
            const auto colon = listen.rfind(':');
            if (colon == std::string::npos) fail(ErrorCode::ConfigError, "listen must be host:port");
            c.listen_host = listen.substr(0, colon);
            c.listen_port = std::stoi(listen.substr(colon + 1));
            if (c.listen_port < 0 || c.listen_port > 65535) fail(ErrorCode::ConfigError, "listen port out of range");
        }
        c.port_file = path("port_file");
        c.storage = path("storage");
        c.fsync = j.value("fsync", false);
        c.framework_key_seed = j.value("framework_key_seed", std::string());
        c.framework_key_file = path("framework_key_file");
        c.key_directory_file = path("key_directory_file");
        c.sync_timeout = positive_ms(j, "sync_timeout_ms", c.sync_timeout);
        c.task_lease = positive_ms(j, "task_lease_ms", c.task_lease);
        c.token_ttl = positive_ms(j, "token_ttl_ms", c.token_ttl);
        if (j.contains("retention_cap")) {
            const auto cap = j.at("retention_cap").get<std::int64_t>();
            if (cap <= 0) fail(ErrorCode::ConfigError, "retention_cap must be positive");
            c.retention_cap = static_cast<std::size_t>(cap);
        }
        const auto hashing = j.value("password_hash", std::string("interactive"));
        if (hashing == "interactive") c.password_params = PasswordHashParams::interactive();
        else if (hashing == "minimum") c.password_params = PasswordHashParams::minimum();
        else fail(ErrorCode::ConfigError, "password_hash must be interactive or minimum");
        c.cors_origins = j.value("cors_origins", std::vector<std::string>{});
        c.seed_catalog = path("seed_catalog");
        c.seed_users = path("seed_users");
        c.seed_models = path("seed_models");
        c.harness_scenario = path("harness_scenario");
        c.harness_seed = j.value("harness_seed", c.harness_seed);
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigError, e.what());
    } catch (const std::invalid_argument&) {
        fail(ErrorCode::ConfigError, "listen port is not a number");
    }
    return c;
}

GatewayConfig GatewayConfig::load(const fs::path& file) {
    return from_json(read_json_file(file), fs::absolute(file).parent_path());
}

Gateway::Gateway(GatewayConfig config, const Clock* clock) : config_(std::move(config)), clock_(clock) {
    crypto_init();
    if (!clock_) {
        owned_clock_ = std::make_unique<SystemClock>();
        clock_ = owned_clock_.get();
    }
    if (!config_.storage.empty()) {
        std::error_code ec;
        fs::create_directories(config_.storage, ec);
        if (ec || access(config_.storage.c_str(), W_OK) != 0)
            fail(ErrorCode::ConfigError, "storage path " + config_.storage.string() + " is not writable");
    }
    load_framework_key();
    keys_.add_key(framework_.admin_id, framework_.key_id, framework_.keys.public_key);
    if (!config_.key_directory_file.empty()) keys_.load_json_file(config_.key_directory_file);

    audit_ = std::make_unique<AuditLog>(open_store("audit"), *clock_);
    ports_ = std::make_unique<PortTable>(*clock_);
    cooperation_ =
        std::make_unique<Cooperation>(*ports_, keys_, *audit_, *clock_, framework_, config_.sync_timeout);
    events_ = std::make_unique<EventBus>(open_store("events"), keys_, *audit_, *clock_, config_.retention_cap);
    engine_ = std::make_unique<Engine>(
        open_store("instances"), *audit_, *clock_,
        [this](const ProcessInstance& inst, const std::string&, const Destination& to, const std::string& payload) {
            return invoke(inst, to, payload);
        },
        [this](const std::string& user, const std::string& role) { return identity_->has_role(user, role); },
        config_.task_lease);
    registry_ = std::make_unique<Registry>(open_store("catalog"), [this](const Binding& b) {
        return std::visit(
            [this](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, SyncPortBinding>) return ports_->routable(x.port);
                else if constexpr (std::is_same_v<T, EventTopicBinding>) return events_->has_topic(x.topic);
                else return engine_->has_model(x.model_id);
            },
            b);
    });
    identity_ = std::make_unique<Identity>(open_store("accounts"), *audit_, *clock_, framework_.keys,
                                           config_.password_params, config_.token_ttl);
    events_->set_listener([this](const std::string& topic, const Envelope& e) { engine_->deliver_event(topic, e); });

    if (!config_.harness_scenario.empty()) seed_scenario(*this, load_scenario(config_.harness_scenario));
    if (!config_.seed_models.empty()) seed_models(read_json_file(config_.seed_models));
    if (!config_.seed_catalog.empty()) seed_catalog(read_json_file(config_.seed_catalog));
    if (!config_.seed_users.empty()) seed_users(read_json_file(config_.seed_users));
}

Gateway::~Gateway() = default;

std::unique_ptr<AppendLog> Gateway::open_store(const std::string& name) const {
    if (config_.storage.empty()) return std::make_unique<AppendLog>();
    return std::make_unique<AppendLog>(config_.storage / (name + ".ndjson"), config_.fsync);
}

void Gateway::load_framework_key() {
    if (!config_.framework_key_seed.empty()) {
        framework_.keys = derive_keypair(config_.framework_key_seed);
        return;
    }
    fs::path file = config_.framework_key_file;
    if (file.empty() && !config_.storage.empty()) {
        file = config_.storage / "framework.key";
        if (!fs::exists(file)) {
            const auto fresh = generate_keypair();
            std::ofstream out(file);
            out << encode_secret_key(fresh.secret_key) << "\n";
            out.close();
            if (!out) fail(ErrorCode::ConfigError, "cannot write " + file.string());
            ::chmod(file.c_str(), 0600);
        }
    }
    if (file.empty()) {
        framework_.keys = generate_keypair();
        return;
    }
    std::ifstream in(file);
    std::string text;
    if (!(in >> text)) fail(ErrorCode::ConfigError, "cannot read framework key " + file.string());
    try {
        framework_.keys.secret_key = decode_secret_key(text);
    } catch (const Error& e) {
        fail(ErrorCode::ConfigError, "framework key " + file.string() + ": " + e.detail());
    }
    std::copy_n(framework_.keys.secret_key.bytes().begin() + 32, 32, framework_.keys.public_key.bytes.begin());
}

Envelope Gateway::framework_envelope(const Destination& to, Profile profile, MessageKind kind, std::string payload,
                                     std::optional<std::string> correlation) {
    auto e = build_envelope({framework_.admin_id, framework_.port_id}, to, profile, kind,
                            {"text/plain", to_bytes(payload)}, std::move(correlation), *clock_);
    return sign_envelope(e, framework_.keys.secret_key, framework_.key_id, keys_);
}

InvokeResult Gateway::invoke(const ProcessInstance& instance, const Destination& to, const std::string& payload) {
    const auto request = framework_envelope(to, Profile::Sync, MessageKind::Request, payload, instance.instance_id);
    // One logical call per (instance, transition index), however often it is retried.
    const auto response = cooperation_->exchange_sync(
        request, std::nullopt, instance.instance_id + "/" + std::to_string(instance.history.size()));
    if (auto f = fault_info(response)) return {false, f->detail, std::string(to_string(f->code))};
    if (response.message_kind == MessageKind::Fault) return {false, response.payload_text(), "backend_fault"};
    return {true, response.payload_text(), ""};
}

void Gateway::spawn_simulated_admin(const SimulatedAdministration& admin) {
    for (const auto& [service, spec] : admin.services)
        if (ports_->routable({admin.admin_id, service}))
            fail(ErrorCode::DuplicatePort, admin.admin_id + "/" + service + " is already online");
    keys_.ensure_key(admin.admin_id, admin.key_id, admin.keys.public_key);
    cooperation_->attach_backend(admin.admin_id, std::make_shared<SimulatedBackend>(admin, keys_, *clock_));
    for (const auto& [service, spec] : admin.services)
        cooperation_->register_applicative_port(admin.admin_id, service, "inproc://" + admin.admin_id);
}

int Gateway::participating_admins(int admin_count, double participation_ratio) {
    if (admin_count <= 0 || !(participation_ratio > 0)) return 0;
    const auto ratio = std::min(participation_ratio, 1.0);
    // The epsilon keeps products such as 10 * 0.8 from flooring to 7.
    return std::min(admin_count, static_cast<int>(std::floor(admin_count * ratio + 1e-9)));
}

std::vector<std::string> Gateway::seed_demo(int admin_count, double participation_ratio) {
    const int n = participating_admins(admin_count, participation_ratio);
    std::vector<std::string> spawned;
    if (n == 0) return spawned;
    registry_->ensure_life_event("moving", "Moving house");
    registry_->ensure_life_event("residence", "Change of residence", "moving");
    registry_->ensure_life_event("family", "Family");
    for (int i = 1; i <= n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "pa-%03d", i);
        std::map<std::string, HandlerSpec> services(standard_services().begin(), standard_services().end());
        if (!ports_->routable({id, standard_services().front().first}))
            spawn_simulated_admin(make_simulated_admin(id, config_.harness_seed, std::move(services)));
        for (const auto& [service, spec] : standard_services()) {
            ServiceDescriptor d;
            d.service_id = std::string(id) + "." + service;
            d.provider_admin_id = id;
            d.title = service + " (" + id + ")";
            d.life_events = {service == "anagrafe.certificate" ? "residence" : "moving"};
            d.min_auth_level = AuthLevel::Weak;
            d.binding = SyncPortBinding{{id, service}};
            registry_->ensure_service(d);
        }
        spawned.emplace_back(id);
    }
    return spawned;
}

void Gateway::seed_catalog(const json& doc) { registry_->import_catalog(doc); }

void Gateway::seed_users(const json& doc) {
    for (const auto& u : doc) {
        const auto user_id = u.at("user_id").get<std::string>();
        if (identity_->has_user(user_id)) continue;
        std::optional<PublicKey> pk;
        if (u.contains("public_key")) pk = decode_public_key(u.at("public_key").get<std::string>());
        identity_->register_user(user_id, u.at("password").get<std::string>(), pk,
                                 u.value("roles", std::set<std::string>{}),
                                 u.value("static_profile", AttributeMap{}));
    }
}

void Gateway::seed_models(const json& doc) {
    for (const auto& m : doc) engine_->ensure_model(process_model_from_json(m));
}

void Gateway::resume() { engine_->resume_all(); }

json Gateway::healthcheck() const {
    auto state = [](bool ok) { return ok ? "ready" : "degraded"; };
    const bool audit_ok = audit_->healthy();
    const json modules{{"audit", state(audit_ok)},
                       {"cooperation", "ready"},
                       {"eventbus", state(events_->healthy())},
                       {"orchestration", state(engine_->healthy())},
                       {"registry", state(registry_->healthy())},
                       {"identity", state(identity_->healthy())}};
    bool all = true;
    for (const auto& [k, v] : modules.items()) all = all && v == "ready";
    return {{"status", all ? "ok" : "degraded"},
            {"modules", modules},
            {"high_water",
             {{"audit", audit_->high_water()},
              {"events", events_->publications()},
              {"transitions", engine_->transitions()}}},
            {"online_admins", ports_->online_admins()},
            {"storage", config_.storage.empty() ? json(nullptr) : json(config_.storage.string())}};
}

}  // namespace ssc
