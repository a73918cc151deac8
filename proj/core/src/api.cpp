// SPDX-License-Identifier: Apache-2.0
#include "ssc/api.hpp"

#include "ssc/codec.hpp"
#include "ssc/gateway.hpp"

#include <algorithm>

namespace ssc {

using nlohmann::json;

int http_status_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Unauthorized:
        case ErrorCode::BadCredential:
        case ErrorCode::InvalidToken:
        case ErrorCode::ExpiredToken: return 401;
        case ErrorCode::Forbidden:
        case ErrorCode::RoleDenied:
        case ErrorCode::NotClaimant: return 403;
        case ErrorCode::NotFound:
        case ErrorCode::UnknownKey:
        case ErrorCode::UnknownPort:
        case ErrorCode::UnknownTopic:
        case ErrorCode::UnknownSubscription:
        case ErrorCode::UnknownModel:
        case ErrorCode::UnknownInstance:
        case ErrorCode::UnknownTask:
        case ErrorCode::UnknownLifeEvent:
        case ErrorCode::UnknownService:
        case ErrorCode::UnknownUser: return 404;
        case ErrorCode::DuplicateKey:
        case ErrorCode::AlreadySigned:
        case ErrorCode::DuplicatePort:
        case ErrorCode::CursorRegression:
        case ErrorCode::AlreadyClaimed:
        case ErrorCode::AlreadyCompleted:
        case ErrorCode::InstanceFinished:
        case ErrorCode::DuplicateNode:
        case ErrorCode::DuplicateService:
        case ErrorCode::DuplicateUser: return 409;
        case ErrorCode::StorageFailure: return 503;
        case ErrorCode::StorageCorrupt: return 500;
        default: return 400;
    }
}

json HttpResponse::json() const {
    if (body.empty()) return nullptr;
    return nlohmann::json::parse(body, nullptr, false);
}

namespace {

HttpResponse reply(const json& body, int status = 200) { return {status, body.dump(), "application/json", {}}; }

std::vector<std::string> segments(std::string_view path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
        const auto j = path.find('/', i);
        const auto end = j == std::string_view::npos ? path.size() : j;
        if (end > i) out.emplace_back(path.substr(i, end - i));
        i = end + 1;
    }
    return out;
}

json body_json(const HttpRequest& r) {
    if (r.body.empty()) return json::object();
    auto j = json::parse(r.body, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::BadRequest, "request body is not JSON");
    return j;
}

std::optional<std::string> query(const HttpRequest& r, const std::string& key) {
    auto it = r.query.find(key);
    if (it == r.query.end() || it->second.empty()) return std::nullopt;
    return it->second;
}

std::optional<std::string> bearer(const HttpRequest& r) {
    auto it = r.headers.find("authorization");
    if (it == r.headers.end()) return std::nullopt;
    constexpr std::string_view prefix = "Bearer ";
    if (!it->second.starts_with(prefix)) return std::nullopt;
    return it->second.substr(prefix.size());
}

std::uint64_t to_u64(const std::string& s) {
    std::size_t used = 0;
    try {
        const auto v = std::stoull(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::BadRequest, "'" + s + "' is not a non-negative integer");
}

json envelope_json(const Envelope& e) { return json::parse(serialize_envelope(e)); }

json to_json(const Topic& t, std::size_t retained) {
    return {{"name", t.name}, {"created_at", format_timestamp(t.created_at)}, {"retained", retained}};
}

json to_json(const Subscription& s) {
    return {{"sub_id", s.sub_id},   {"admin_id", s.subscriber.admin_id}, {"port_id", s.subscriber.port_id},
            {"topic", s.topic},     {"durable", s.durable},              {"cursor", s.cursor},
            {"start_seq", s.start_seq}};
}

json to_json(const PublicationReceipt& r) {
    return {{"topic", r.topic}, {"publisher", r.publisher}, {"seq", r.seq}, {"global_seq", r.global_seq},
            {"duplicate", r.duplicate}};
}

json to_json(const ApplicativePortRecord& p) {
    return {{"admin_id", p.admin_id},
            {"service_id", p.service_id},
            {"endpoint", p.endpoint},
            {"status", p.status == PortStatus::Online ? "online" : "offline"},
            {"registered_at", format_timestamp(p.registered_at)}};
}

json exchange_result(const Envelope& response) {
    json out{{"kind", to_string(response.message_kind)}, {"envelope", envelope_json(response)}};
    if (auto f = fault_info(response)) out["fault"] = {{"code", to_string(f->code)}, {"detail", f->detail}};
    else out["payload"] = response.payload_text();
    return out;
}

AuditFilter audit_filter(const HttpRequest& r) {
    AuditFilter f;
    auto ts = [&](const char* key) -> std::optional<Timestamp> {
        auto v = query(r, key);
        if (!v) return std::nullopt;
        auto t = parse_timestamp(*v);
        if (!t) fail(ErrorCode::BadRequest, std::string(key) + " must be an ISO-8601 UTC timestamp");
        return t;
    };
    f.from = ts("from");
    f.to = ts("to");
    if (auto c = query(r, "category")) {
        f.category = parse_audit_category(*c);
        if (!f.category) fail(ErrorCode::BadRequest, "unknown category '" + *c + "'");
    }
    if (auto o = query(r, "outcome")) {
        f.outcome = parse_outcome(*o);
        if (!f.outcome) fail(ErrorCode::BadRequest, "unknown outcome '" + *o + "'");
    }
    f.actor = query(r, "actor");
    f.subject = query(r, "subject");
    f.correlation_id = query(r, "correlation_id");
    return f;
}

json records_json(const std::vector<AuditRecord>& records) {
    json out = json::array();
    for (const auto& r : records) out.push_back(to_json(r));
    return out;
}

}  // namespace

ApiRouter::ApiRouter(Gateway& gateway, std::vector<std::string> cors_origins)
    : gw_(gateway), cors_origins_(std::move(cors_origins)) {}

HttpResponse ApiRouter::handle(const HttpRequest& request) {
    HttpResponse response;
    try {
        response = dispatch(request);
    } catch (const Error& e) {
        response = reply({{"error", to_string(e.code())}, {"detail", e.detail()}}, http_status_for(e.code()));
    } catch (const json::exception& e) {
        response = reply({{"error", "BadRequest"}, {"detail", e.what()}}, 400);
    } catch (const std::exception& e) {
        response = reply({{"error", "Internal"}, {"detail", e.what()}}, 500);
    }
    apply_cors(request, response);
    return response;
}

void ApiRouter::apply_cors(const HttpRequest& request, HttpResponse& response) const {
    auto origin = request.headers.find("origin");
    if (origin == request.headers.end()) return;
    const bool allowed = std::any_of(cors_origins_.begin(), cors_origins_.end(),
                                     [&](const auto& o) { return o == "*" || o == origin->second; });
    if (!allowed) return;
    response.headers["Access-Control-Allow-Origin"] = origin->second;
    response.headers["Vary"] = "Origin";
    response.headers["Access-Control-Allow-Headers"] = "Authorization, Content-Type";
    response.headers["Access-Control-Allow-Methods"] = "GET, POST, PATCH, DELETE, OPTIONS";
}

HttpResponse ApiRouter::dispatch(const HttpRequest& r) {
    const auto seg = segments(r.path);
    const auto& m = r.method;
    const auto n = seg.size();
    auto is = [&](std::initializer_list<std::string_view> parts) {
        if (parts.size() != n) return false;
        std::size_t i = 0;
        for (auto p : parts) {
            if (p != "*" && p != seg[i]) return false;
            ++i;
        }
        return true;
    };
    auto user = [&]() -> TokenClaims {
        auto token = bearer(r);
        if (!token) fail(ErrorCode::Unauthorized, "bearer token required");
        return gw_.identity().validate_token(*token);
    };

    if (m == "OPTIONS") return {204, "", "text/plain", {}};
    if (n == 0) fail(ErrorCode::NotFound, r.path);

    // --- health
    if (m == "GET" && is({"health"})) return reply(gw_.healthcheck());

    // --- cooperation
    if (m == "POST" && is({"exchange"})) {
        const auto response = gw_.cooperation().exchange_sync(parse_envelope(r.body));
        return {200, serialize_envelope(response), "application/json", {}};
    }
    if (seg[0] == "ports") {
        if (m == "GET" && n == 1) {
            json out = json::array();
            for (const auto& p : gw_.ports().list()) out.push_back(to_json(p));
            return reply(out);
        }
        if (m == "POST" && n == 1) {
            const auto b = body_json(r);
            return reply(to_json(gw_.cooperation().register_applicative_port(
                             b.at("admin_id").get<std::string>(), b.at("service_id").get<std::string>(),
                             b.at("endpoint").get<std::string>())),
                         201);
        }
        if (m == "DELETE" && n == 3) {
            gw_.cooperation().deregister_applicative_port(seg[1], seg[2]);
            return {204, "", "text/plain", {}};
        }
    }

    // --- events
    if (seg[0] == "topics") {
        auto& bus = gw_.events();
        if (m == "GET" && n == 1) {
            json out = json::array();
            for (const auto& t : bus.topics()) out.push_back(to_json(t, bus.retained(t.name)));
            return reply(out);
        }
        if (m == "POST" && n == 1) {
            const auto t = bus.create_topic(body_json(r).at("name").get<std::string>());
            return reply(to_json(t, bus.retained(t.name)), 201);
        }
        if (m == "POST" && is({"topics", "*", "publish"}))
            return reply(to_json(bus.publish(parse_envelope(r.body), seg[1])));
    }
    if (seg[0] == "subscriptions") {
        auto& bus = gw_.events();
        if (m == "GET" && n == 1) {
            json out = json::array();
            for (const auto& s : bus.subscriptions()) out.push_back(to_json(s));
            return reply(out);
        }
        if (m == "POST" && n == 1) {
            const auto b = body_json(r);
            return reply(to_json(bus.subscribe({b.at("admin_id").get<std::string>(), b.value("port_id", std::string())},
                                               b.at("topic").get<std::string>(), b.value("durable", true))),
                         201);
        }
        if (m == "GET" && n == 2) return reply(to_json(bus.subscription(seg[1])));
        if (m == "GET" && is({"subscriptions", "*", "pull"})) {
            const auto max = query(r, "max") ? to_u64(*query(r, "max")) : 100;
            json events = json::array();
            for (const auto& e : bus.pull(seg[1], static_cast<std::size_t>(std::min<std::uint64_t>(max, 10'000))))
                events.push_back({{"global_seq", e.global_seq}, {"envelope", envelope_json(e.envelope)}});
            return reply({{"events", events}});
        }
        if (m == "POST" && is({"subscriptions", "*", "ack"})) {
            bus.ack(seg[1], body_json(r).at("up_to").get<std::uint64_t>());
            return reply(to_json(bus.subscription(seg[1])));
        }
    }

    // --- orchestration
    if (seg[0] == "models") {
        auto& engine = gw_.engine();
        if (m == "GET" && n == 1) {
            json out = json::array();
            for (const auto& model : engine.models())
                out.push_back({{"model_id", model.model_id}, {"version", model.version}});
            return reply(out);
        }
        if (m == "POST" && n == 1) {
            auto model = process_model_from_json(body_json(r));
            const auto version = engine.register_model(model);
            return reply({{"model_id", model.model_id}, {"version", version}}, 201);
        }
        if (m == "GET" && n == 2) {
            std::optional<int> version;
            if (auto v = query(r, "version")) version = static_cast<int>(to_u64(*v));
            return reply(to_json(engine.model(seg[1], version)));
        }
    }
    if (seg[0] == "instances") {
        auto& engine = gw_.engine();
        const auto claims = user();
        if (m == "GET" && n == 1) return reply(engine.instance_ids());
        if (m == "POST" && n == 1) {
            const auto b = body_json(r);
            std::optional<int> version;
            if (b.contains("version")) version = b.at("version").get<int>();
            std::optional<std::string> corr;
            if (b.contains("correlation") && !b.at("correlation").is_null())
                corr = b.at("correlation").get<std::string>();
            const auto id = engine.start_instance(b.at("model_id").get<std::string>(), version,
                                                  b.value("inputs", AttributeMap{}), corr);
            return reply(to_json(engine.instance_state(id)), 201);
        }
        if (m == "GET" && n == 2) return reply(to_json(engine.instance_state(seg[1])));
        if (m == "POST" && is({"instances", "*", "advance"})) return reply(to_json(engine.advance(seg[1])));
        (void)claims;
    }
    if (seg[0] == "tasks") {
        auto& engine = gw_.engine();
        const auto claims = user();
        if (m == "GET" && n == 1) {
            TaskFilter f;
            f.role = query(r, "role");
            f.instance_id = query(r, "instance_id");
            if (auto s = query(r, "state")) {
                f.state = parse_task_state(*s);
                if (!f.state) fail(ErrorCode::BadRequest, "unknown task state '" + *s + "'");
            }
            const auto roles = gw_.identity().account(claims.user_id).roles;
            json out = json::array();
            for (const auto& t : engine.list_tasks(f))
                if (roles.contains(t.role)) out.push_back(to_json(t));
            return reply(out);
        }
        if (m == "POST" && is({"tasks", "*", "claim"})) return reply(to_json(engine.claim_task(seg[1], claims.user_id)));
        if (m == "POST" && is({"tasks", "*", "complete"})) {
            const auto outcome = body_json(r).at("outcome").get<std::string>();
            return reply(to_json(engine.complete_task(seg[1], claims.user_id, outcome)));
        }
    }

    // --- registry
    if (seg[0] == "taxonomy") {
        if (m == "GET" && n == 1) {
            json out = json::array();
            for (const auto& node : gw_.registry().list_taxonomy()) out.push_back(to_json(node));
            return reply(out);
        }
        if (m == "POST" && n == 1) {
            const auto node = life_event_from_json(body_json(r));
            return reply(to_json(gw_.registry().add_life_event(node.node_id, node.label, node.parent)), 201);
        }
    }
    if (seg[0] == "services") {
        auto& reg = gw_.registry();
        if (m == "GET" && n == 1) {
            std::optional<UsageTarget> target;
            if (auto t = query(r, "target")) {
                target = parse_usage_target(*t);
                if (!target) fail(ErrorCode::BadRequest, "unknown target '" + *t + "'");
            }
            std::vector<ServiceDescriptor> found;
            if (auto le = query(r, "life_event")) {
                found = reg.find_by_life_event(*le, target);
            } else {
                for (auto& d : reg.services())
                    if (!target || d.usage_target == *target) found.push_back(std::move(d));
            }
            json out = json::array();
            for (const auto& d : found) out.push_back(to_json(d));
            return reply(out);
        }
        if (m == "POST" && n == 1) {
            const auto d = service_descriptor_from_json(body_json(r));
            reg.register_service(d);
            return reply(to_json(d), 201);
        }
        if (m == "GET" && n == 2) return reply(to_json(reg.get_descriptor(seg[1])));
        if (m == "POST" && is({"services", "*", "invoke"})) {
            const auto d = reg.get_descriptor(seg[1]);
            const auto token = bearer(r);
            const auto decision = gw_.identity().authorize(token, d);
            if (!decision.allow) {
                const bool level = decision.reason == "level";
                return reply({{"error", level ? "Forbidden" : "Unauthorized"}, {"reason", decision.reason},
                              {"required", to_string(d.min_auth_level)}},
                             level ? 403 : 401);
            }
            const auto b = body_json(r);
            std::optional<std::string> corr;
            if (b.contains("correlation") && !b.at("correlation").is_null())
                corr = b.at("correlation").get<std::string>();
            const auto payload = b.value("payload", std::string());
            return std::visit(
                [&](const auto& binding) -> HttpResponse {
                    using T = std::decay_t<decltype(binding)>;
                    if constexpr (std::is_same_v<T, SyncPortBinding>) {
                        const auto request =
                            gw_.framework_envelope(binding.port, Profile::Sync, MessageKind::Request, payload, corr);
                        return reply(exchange_result(gw_.cooperation().exchange_sync(request)));
                    } else if constexpr (std::is_same_v<T, EventTopicBinding>) {
                        const auto event = gw_.framework_envelope({d.provider_admin_id, d.service_id},
                                                                  Profile::AsyncEvent, MessageKind::Event, payload, corr);
                        return reply(to_json(gw_.events().publish(event, binding.topic)));
                    } else {
                        auto& engine = gw_.engine();
                        const auto id =
                            engine.start_instance(binding.model_id, std::nullopt, b.value("inputs", AttributeMap{}), corr);
                        return reply(to_json(engine.instance_state(id)), 201);
                    }
                },
                d.binding);
        }
    }

    // --- identity
    if (seg[0] == "auth" && m == "POST" && n == 2) {
        auto& id = gw_.identity();
        const auto b = body_json(r);
        if (seg[1] == "register") {
            // Roles are assigned by seeding only; self-registration cannot grant them.
            if (b.contains("roles") && !b.at("roles").empty())
                fail(ErrorCode::Forbidden, "roles cannot be self-assigned");
            std::optional<PublicKey> pk;
            if (b.contains("public_key") && !b.at("public_key").is_null()) {
                try {
                    pk = decode_public_key(b.at("public_key").get<std::string>());
                } catch (const Error& e) {
                    fail(ErrorCode::BadRequest, "public_key: " + e.detail());
                }
            }
            auto account = id.register_user(b.at("user_id").get<std::string>(), b.at("password").get<std::string>(), pk,
                                            {}, b.value("static_profile", AttributeMap{}));
            return reply(to_json(account), 201);
        }
        if (seg[1] == "login")
            return reply(to_json(id.authenticate(b.at("user_id").get<std::string>(), b.at("password").get<std::string>())));
        if (seg[1] == "challenge") return reply({{"nonce", id.issue_challenge(b.at("user_id").get<std::string>())}});
        if (seg[1] == "respond")
            return reply(to_json(id.authenticate_strong(b.at("user_id").get<std::string>(), b.at("nonce").get<std::string>(),
                                                        b.at("signature").get<std::string>())));
    }
    if (seg[0] == "profile") {
        const auto claims = user();
        auto& id = gw_.identity();
        if (m == "GET" && n == 1) {
            const auto a = id.account(claims.user_id);
            return reply({{"user_id", a.user_id},
                          {"level", to_string(claims.level)},
                          {"roles", a.roles},
                          {"strong_credential", a.has_strong_credential},
                          {"static_profile", a.static_profile},
                          {"dynamic_preferences", a.dynamic_preferences}});
        }
        if (m == "PATCH" && is({"profile", "preferences"})) {
            const auto delta = body_json(r).get<AttributeMap>();
            return reply({{"dynamic_preferences", id.update_preferences(claims.user_id, delta)}});
        }
    }

    // --- audit
    if (seg[0] == "audit" && m == "GET") {
        if (n == 1) return reply(records_json(gw_.audit().query(audit_filter(r))));
        if (is({"audit", "trace", "*"})) return reply(records_json(gw_.audit().trace(seg[2])));
    }

    fail(ErrorCode::NotFound, m + " " + r.path);
}

HttpResponse GatewayClient::request(const std::string& method, const std::string& path,
                                    const std::optional<json>& body, const std::string& token,
                                    const std::map<std::string, std::string>& query) {
    HttpRequest r{method, path, query, {}, body ? body->dump() : std::string()};
    if (body) r.headers["content-type"] = "application/json";
    if (!token.empty()) r.headers["authorization"] = "Bearer " + token;
    return send(r);
}

HttpResponse GatewayClient::post_raw(const std::string& path, std::string body, const std::string& token) {
    HttpRequest r{"POST", path, {}, {{"content-type", "application/json"}}, std::move(body)};
    if (!token.empty()) r.headers["authorization"] = "Bearer " + token;
    return send(r);
}

}  // namespace ssc
