// SPDX-License-Identifier: Apache-2.0
#include "ssc/registry.hpp"

#include "ssc/error.hpp"

#include <algorithm>
#include <mutex>

namespace ssc {

using nlohmann::json;

std::string_view to_string(UsageTarget t) noexcept {
    switch (t) {
        case UsageTarget::Citizen: return "citizen";
        case UsageTarget::Business: return "business";
        case UsageTarget::Administration: return "administration";
    }
    return "citizen";
}

std::optional<UsageTarget> parse_usage_target(std::string_view s) noexcept {
    for (auto t : {UsageTarget::Citizen, UsageTarget::Business, UsageTarget::Administration})
        if (to_string(t) == s) return t;
    return std::nullopt;
}

std::string_view to_string(AuthLevel l) noexcept {
    switch (l) {
        case AuthLevel::None: return "none";
        case AuthLevel::Weak: return "weak";
        case AuthLevel::Strong: return "strong";
    }
    return "none";
}

std::optional<AuthLevel> parse_auth_level(std::string_view s) noexcept {
    for (auto l : {AuthLevel::None, AuthLevel::Weak, AuthLevel::Strong})
        if (to_string(l) == s) return l;
    return std::nullopt;
}

json to_json(const LifeEventNode& n) {
    return {{"node_id", n.node_id}, {"label", n.label}, {"parent", n.parent ? json(*n.parent) : json(nullptr)}};
}

LifeEventNode life_event_from_json(const json& j) {
    try {
        LifeEventNode n{j.at("node_id").get<std::string>(), j.value("label", std::string()), std::nullopt};
        if (auto p = j.find("parent"); p != j.end() && !p->is_null()) n.parent = p->get<std::string>();
        return n;
    } catch (const json::exception& e) {
        fail(ErrorCode::BadRequest, std::string("life event: ") + e.what());
    }
}

json to_json(const ServiceDescriptor& d) {
    json binding = std::visit(
        [](const auto& b) -> json {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, SyncPortBinding>)
                return {{"type", "sync_port"}, {"admin_id", b.port.admin_id}, {"service_id", b.port.service_id}};
            else if constexpr (std::is_same_v<T, EventTopicBinding>)
                return {{"type", "event_topic"}, {"topic", b.topic}};
            else
                return {{"type", "process"}, {"model_id", b.model_id}};
        },
        d.binding);
    return {{"service_id", d.service_id},
            {"provider_admin_id", d.provider_admin_id},
            {"title", d.title},
            {"description", d.description},
            {"life_events", d.life_events},
            {"usage_target", to_string(d.usage_target)},
            {"min_auth_level", to_string(d.min_auth_level)},
            {"binding", binding}};
}

ServiceDescriptor service_descriptor_from_json(const json& j) {
    try {
        ServiceDescriptor d;
        d.service_id = j.at("service_id").get<std::string>();
        d.provider_admin_id = j.at("provider_admin_id").get<std::string>();
        d.title = j.value("title", std::string());
        d.description = j.value("description", std::string());
        d.life_events = j.value("life_events", std::set<std::string>{});
        auto target = parse_usage_target(j.value("usage_target", std::string("citizen")));
        if (!target) fail(ErrorCode::BadRequest, "unknown usage_target");
        d.usage_target = *target;
        auto level = parse_auth_level(j.value("min_auth_level", std::string("none")));
        if (!level) fail(ErrorCode::BadRequest, "unknown min_auth_level");
        d.min_auth_level = *level;
        const auto& b = j.at("binding");
        const auto type = b.at("type").get<std::string>();
        if (type == "sync_port")
            d.binding = SyncPortBinding{{b.at("admin_id").get<std::string>(), b.at("service_id").get<std::string>()}};
        else if (type == "event_topic")
            d.binding = EventTopicBinding{b.at("topic").get<std::string>()};
        else if (type == "process")
            d.binding = ProcessBinding{b.at("model_id").get<std::string>()};
        else
            fail(ErrorCode::BadRequest, "unknown binding type '" + type + "'");
        if (d.service_id.empty()) fail(ErrorCode::BadRequest, "empty service_id");
        return d;
    } catch (const json::exception& e) {
        fail(ErrorCode::BadRequest, std::string("service descriptor: ") + e.what());
    }
}

Registry::Registry(std::unique_ptr<AppendLog> store, BindingCheck check)
    : store_(std::move(store)), check_(std::move(check)) {
    // Bindings were checked when first registered; their targets may be
    // re-created later in startup, so replay does not re-check them.
    store_->replay([this](const json& j, std::size_t) {
        const auto t = j.at("t").get<std::string>();
        if (t == "node") insert_node(life_event_from_json(j.at("node")));
        else if (t == "service") {
            auto d = service_descriptor_from_json(j.at("service"));
            services_[d.service_id] = std::move(d);
        } else
            fail(ErrorCode::StorageCorrupt, "unknown catalog record type '" + t + "'");
    });
}

void Registry::set_binding_check(BindingCheck check) {
    std::unique_lock lock(mu_);
    check_ = std::move(check);
}

void Registry::insert_node(const LifeEventNode& n) {
    nodes_[n.node_id] = n;
    children_[n.parent.value_or("")].push_back(n.node_id);
}

LifeEventNode Registry::add_life_event(const std::string& node_id, const std::string& label,
                                       std::optional<std::string> parent) {
    if (node_id.empty()) fail(ErrorCode::BadRequest, "empty node_id");
    if (parent && parent->empty()) parent.reset();
    std::unique_lock lock(mu_);
    if (nodes_.contains(node_id)) fail(ErrorCode::DuplicateNode, node_id);
    if (parent && *parent == node_id) fail(ErrorCode::CycleDetected, node_id + " cannot be its own parent");
    if (parent && !nodes_.contains(*parent)) fail(ErrorCode::UnknownParent, *parent);
    LifeEventNode n{node_id, label, parent};
    store_->append({{"t", "node"}, {"node", to_json(n)}});
    insert_node(n);
    return n;
}

LifeEventNode Registry::ensure_life_event(const std::string& node_id, const std::string& label,
                                          std::optional<std::string> parent) {
    {
        std::shared_lock lock(mu_);
        auto it = nodes_.find(node_id);
        if (it != nodes_.end()) {
            if (it->second.parent != parent) fail(ErrorCode::DuplicateNode, node_id + " exists with another parent");
            return it->second;
        }
    }
    return add_life_event(node_id, label, std::move(parent));
}

void Registry::register_service(const ServiceDescriptor& d) {
    if (d.service_id.empty()) fail(ErrorCode::BadRequest, "empty service_id");
    std::unique_lock lock(mu_);
    if (services_.contains(d.service_id)) fail(ErrorCode::DuplicateService, d.service_id);
    for (const auto& n : d.life_events)
        if (!nodes_.contains(n)) fail(ErrorCode::UnknownLifeEvent, n);
    if (!check_ || !check_(d.binding)) fail(ErrorCode::UnknownBinding, to_json(d)["binding"].dump());
    store_->append({{"t", "service"}, {"service", to_json(d)}});
    services_[d.service_id] = d;
}

void Registry::ensure_service(const ServiceDescriptor& d) {
    {
        std::shared_lock lock(mu_);
        auto it = services_.find(d.service_id);
        if (it != services_.end()) {
            if (it->second != d) fail(ErrorCode::DuplicateService, d.service_id + " exists with other content");
            return;
        }
    }
    register_service(d);
}

std::vector<ServiceDescriptor> Registry::find_by_life_event(const std::string& node_id,
                                                            std::optional<UsageTarget> target) const {
    std::shared_lock lock(mu_);
    if (!nodes_.contains(node_id)) fail(ErrorCode::UnknownLifeEvent, node_id);
    std::set<std::string> subtree;
    std::vector<std::string> stack{node_id};
    while (!stack.empty()) {
        auto cur = std::move(stack.back());
        stack.pop_back();
        if (auto it = children_.find(cur); it != children_.end())
            stack.insert(stack.end(), it->second.begin(), it->second.end());
        subtree.insert(std::move(cur));
    }
    std::vector<ServiceDescriptor> out;
    for (const auto& [id, d] : services_) {
        if (target && d.usage_target != *target) continue;
        if (std::any_of(d.life_events.begin(), d.life_events.end(), [&](const auto& n) { return subtree.contains(n); }))
            out.push_back(d);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.provider_admin_id, a.service_id) < std::tie(b.provider_admin_id, b.service_id);
    });
    return out;
}

ServiceDescriptor Registry::get_descriptor(const std::string& service_id) const {
    std::shared_lock lock(mu_);
    auto it = services_.find(service_id);
    if (it == services_.end()) fail(ErrorCode::UnknownService, service_id);
    return it->second;
}

std::vector<ServiceDescriptor> Registry::services() const {
    std::shared_lock lock(mu_);
    std::vector<ServiceDescriptor> out;
    for (const auto& [id, d] : services_) out.push_back(d);
    return out;
}

std::vector<LifeEventNode> Registry::list_taxonomy() const {
    std::shared_lock lock(mu_);
    std::vector<LifeEventNode> out;
    auto visit = [&](auto&& self, const std::string& parent) -> void {
        auto it = children_.find(parent);
        if (it == children_.end()) return;
        auto kids = it->second;
        std::sort(kids.begin(), kids.end());
        for (const auto& k : kids) {
            out.push_back(nodes_.at(k));
            self(self, k);
        }
    };
    visit(visit, "");
    return out;
}

bool Registry::has_node(const std::string& node_id) const {
    std::shared_lock lock(mu_);
    return nodes_.contains(node_id);
}

void Registry::import_catalog(const json& doc) {
    for (const auto& n : doc.value("nodes", json::array())) {
        auto node = life_event_from_json(n);
        ensure_life_event(node.node_id, node.label, node.parent);
    }
    for (const auto& s : doc.value("services", json::array())) ensure_service(service_descriptor_from_json(s));
}

}  // namespace ssc
