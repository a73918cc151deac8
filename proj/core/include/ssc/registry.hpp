// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ssc/clock.hpp"
#include "ssc/envelope.hpp"
#include "ssc/storage.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

namespace ssc {

enum class UsageTarget { Citizen, Business, Administration };
std::string_view to_string(UsageTarget t) noexcept;
std::optional<UsageTarget> parse_usage_target(std::string_view s) noexcept;

/// Ordered: none < weak < strong.
enum class AuthLevel { None = 0, Weak = 1, Strong = 2 };
std::string_view to_string(AuthLevel l) noexcept;
std::optional<AuthLevel> parse_auth_level(std::string_view s) noexcept;

struct LifeEventNode {
    std::string node_id;
    std::string label;
    std::optional<std::string> parent;

    bool operator==(const LifeEventNode&) const = default;
};

struct SyncPortBinding {
    Destination port;
    bool operator==(const SyncPortBinding&) const = default;
};
struct EventTopicBinding {
    std::string topic;
    bool operator==(const EventTopicBinding&) const = default;
};
struct ProcessBinding {
    std::string model_id;
    bool operator==(const ProcessBinding&) const = default;
};
using Binding = std::variant<SyncPortBinding, EventTopicBinding, ProcessBinding>;

struct ServiceDescriptor {
    std::string service_id;
    std::string provider_admin_id;
    std::string title;
    std::string description;
    std::set<std::string> life_events;
    UsageTarget usage_target = UsageTarget::Citizen;
    AuthLevel min_auth_level = AuthLevel::None;
    Binding binding;

    bool operator==(const ServiceDescriptor&) const = default;
};

nlohmann::json to_json(const LifeEventNode& n);
LifeEventNode life_event_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ServiceDescriptor& d);
/// Throws BadRequest on malformed documents.
ServiceDescriptor service_descriptor_from_json(const nlohmann::json& j);

/// Services catalog over an append-only life-event forest.
class Registry {
public:
    /// Answers whether a binding's target currently exists in its owning module.
    using BindingCheck = std::function<bool(const Binding&)>;

    explicit Registry(std::unique_ptr<AppendLog> store, BindingCheck check = {});

    void set_binding_check(BindingCheck check);

    LifeEventNode add_life_event(const std::string& node_id, const std::string& label,
                                 std::optional<std::string> parent = std::nullopt);
    /// Same node already present is a no-op; a conflicting one is DuplicateNode.
    LifeEventNode ensure_life_event(const std::string& node_id, const std::string& label,
                                    std::optional<std::string> parent = std::nullopt);
    void register_service(const ServiceDescriptor& d);
    void ensure_service(const ServiceDescriptor& d);

    std::vector<ServiceDescriptor> find_by_life_event(const std::string& node_id,
                                                      std::optional<UsageTarget> target = std::nullopt) const;
    ServiceDescriptor get_descriptor(const std::string& service_id) const;
    std::vector<ServiceDescriptor> services() const;
    /// Depth-first preorder, siblings by node_id.
    std::vector<LifeEventNode> list_taxonomy() const;
    bool has_node(const std::string& node_id) const;

    /// Imports {"nodes":[...],"services":[...]}, skipping entries already present.
    void import_catalog(const nlohmann::json& doc);

    bool healthy() const { return store_->healthy(); }

private:
    void insert_node(const LifeEventNode& n);

    std::unique_ptr<AppendLog> store_;
    BindingCheck check_;
    mutable std::shared_mutex mu_;
    std::map<std::string, LifeEventNode> nodes_;
    std::map<std::string, std::vector<std::string>> children_;
    std::map<std::string, ServiceDescriptor> services_;
};

}  // namespace ssc
