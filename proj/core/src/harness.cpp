// SPDX-License-Identifier: Apache-2.0
#include "ssc/harness.hpp"

#include "ssc/codec.hpp"
#include "ssc/error.hpp"


#include <thread>

namespace ssc {

using nlohmann::json;

json to_json(const HandlerSpec& h) {
    static constexpr const char* kinds[] = {"echo", "template", "fault"};
    json j{{"kind", kinds[static_cast<int>(h.kind)]}};
    if (!h.text.empty()) j["text"] = h.text;
    if (h.latency.count() > 0) j["latency_ms"] = h.latency.count();
    return j;
}

HandlerSpec handler_spec_from_json(const json& j) {
    HandlerSpec h;
    if (j.is_string()) {
        h.kind = HandlerKind::Template;
        h.text = j.get<std::string>();
        return h;
    }
    const auto kind = j.value("kind", std::string("echo"));
    if (kind == "echo") h.kind = HandlerKind::Echo;
    else if (kind == "template") h.kind = HandlerKind::Template;
    else if (kind == "fault") h.kind = HandlerKind::Fault;
    else fail(ErrorCode::ConfigError, "unknown handler kind '" + kind + "'");
    h.text = j.value("text", std::string());
    h.latency = Millis{j.value("latency_ms", std::int64_t{0})};
    return h;
}

SimulatedAdministration make_simulated_admin(const std::string& admin_id, const std::string& seed,
                                             std::map<std::string, HandlerSpec> services) {
    return {admin_id, admin_id + "-k1", derive_keypair(seed + "/" + admin_id), std::move(services)};
}

Envelope SimulatedBackend::handle(const Envelope& request) {
    auto it = admin_.services.find(request.destination.service_id);
    if (it == admin_.services.end())
        throw std::runtime_error(admin_.admin_id + " offers no service " + request.destination.service_id);
    const auto& spec = it->second;
    if (spec.latency.count() > 0) std::this_thread::sleep_for(spec.latency);
    if (spec.kind == HandlerKind::Fault)
        throw std::runtime_error(spec.text.empty() ? "injected fault" : spec.text);

    std::string text = request.payload_text();
    if (spec.kind == HandlerKind::Template) {
        text.clear();
        const std::map<std::string, std::string> vars{
            {"request", request.payload_text()}, {"admin", admin_.admin_id}, {"service", request.destination.service_id}};
        for (std::size_t i = 0; i < spec.text.size();) {
            if (spec.text.compare(i, 2, "${") == 0) {
                const auto close = spec.text.find('}', i);
                if (close != std::string::npos) {
                    auto v = vars.find(spec.text.substr(i + 2, close - i - 2));
                    if (v != vars.end()) {
                        text += v->second;
                        i = close + 1;
                        continue;
                    }
                }
            }
            text.push_back(spec.text[i++]);
        }
    }
    auto response = build_envelope({admin_.admin_id, request.destination.service_id},
                                   {request.sender.admin_id, request.destination.service_id}, Profile::Sync,
                                   MessageKind::Response, {request.body.content_type, to_bytes(text)},
                                   request.envelope_id, clock_);
    return sign_envelope(response, admin_.keys.secret_key, admin_.key_id, keys_);
}

}  // namespace ssc
