// SPDX-License-Identifier: Apache-2.0
#include "ssc/cooperation.hpp"

#include "ssc/error.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <condition_variable>
#include <mutex>
#include <thread>

namespace ssc {

std::string_view to_string(FaultCode c) noexcept {
    switch (c) {
        case FaultCode::NoRoute: return "no_route";
        case FaultCode::Timeout: return "timeout";
        case FaultCode::VerificationFailed: return "verification_failed";
        case FaultCode::BackendFault: return "backend_fault";
        case FaultCode::Unauthorized: return "unauthorized";
        case FaultCode::StorageFailure: return "storage_failure";
    }
    return "backend_fault";
}

std::optional<FaultCode> parse_fault_code(std::string_view s) noexcept {
    for (auto c : {FaultCode::NoRoute, FaultCode::Timeout, FaultCode::VerificationFailed, FaultCode::BackendFault,
                   FaultCode::Unauthorized, FaultCode::StorageFailure})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

Body fault_body(const FaultInfo& info) {
    nlohmann::json j{{"code", to_string(info.code)}, {"detail", info.detail}};
    return Body{std::string(kJsonContentType), to_bytes(j.dump())};
}

std::optional<FaultInfo> fault_info(const Envelope& e) {
    if (e.message_kind != MessageKind::Fault) return std::nullopt;
    try {
        auto j = nlohmann::json::parse(e.payload_text());
        auto code = parse_fault_code(j.at("code").get<std::string>());
        if (!code) return FaultInfo{FaultCode::BackendFault, e.payload_text()};
        return FaultInfo{*code, j.value("detail", std::string())};
    } catch (const nlohmann::json::exception&) {
        return FaultInfo{FaultCode::BackendFault, e.payload_text()};
    }
}

// ---------------------------------------------------------------------------

ApplicativePortRecord PortTable::register_port(const std::string& admin_id, const std::string& service_id,
                                               const std::string& endpoint) {
    if (admin_id.empty() || service_id.empty()) fail(ErrorCode::InvalidAddress, "empty port identifier");
    if (endpoint.empty()) fail(ErrorCode::InvalidAddress, "empty endpoint");
    const Destination key{admin_id, service_id};
    std::unique_lock lock(mu_);
    auto it = ports_.find(key);
    if (it != ports_.end() && it->second.status == PortStatus::Online)
        fail(ErrorCode::DuplicatePort, admin_id + "/" + service_id);
    ApplicativePortRecord rec{admin_id, service_id, endpoint, PortStatus::Online, clock_.now()};
    ports_[key] = rec;
    return rec;
}

void PortTable::deregister_port(const std::string& admin_id, const std::string& service_id) {
    std::unique_lock lock(mu_);
    auto it = ports_.find(Destination{admin_id, service_id});
    if (it == ports_.end()) fail(ErrorCode::UnknownPort, admin_id + "/" + service_id);
    it->second.status = PortStatus::Offline;
}

std::string PortTable::resolve(const Destination& destination) const {
    std::shared_lock lock(mu_);
    auto it = ports_.find(destination);
    if (it == ports_.end() || it->second.status != PortStatus::Online)
        fail(ErrorCode::NoRoute, destination.admin_id + "/" + destination.service_id);
    return it->second.endpoint;
}

bool PortTable::routable(const Destination& destination) const {
    std::shared_lock lock(mu_);
    auto it = ports_.find(destination);
    return it != ports_.end() && it->second.status == PortStatus::Online;
}

std::vector<ApplicativePortRecord> PortTable::list() const {
    std::shared_lock lock(mu_);
    std::vector<ApplicativePortRecord> out;
    for (const auto& [k, rec] : ports_) out.push_back(rec);
    return out;
}

std::vector<std::string> PortTable::online_admins() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, rec] : ports_)
        if (rec.status == PortStatus::Online && (out.empty() || out.back() != rec.admin_id)) out.push_back(rec.admin_id);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct TimeoutError {};

/// Result slot shared with a worker that may outlive the waiting caller.
struct Pending {
    std::mutex mu;
    std::condition_variable cv;
    bool done = false;
    std::optional<Envelope> response;
    std::string error;
};

Envelope http_post(const std::string& url, const Envelope& request, Millis timeout) {
    // http://host:port/path
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end + 3);
    const auto origin = url.substr(0, path_start);
    const auto path = path_start == std::string::npos ? std::string("/") : url.substr(path_start);
    httplib::Client cli(origin);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    auto res = cli.Post(path, serialize_envelope(request), std::string(kJsonContentType));
    if (!res) throw std::runtime_error("http transport: " + httplib::to_string(res.error()));
    if (res->status != 200) throw std::runtime_error("http transport: status " + std::to_string(res->status));
    return parse_envelope(res->body);
}

}  // namespace

namespace {

std::optional<std::string> keyed(const std::optional<std::string>& key, const char* suffix) {
    if (!key) return std::nullopt;
    return "exchange/" + *key + suffix;
}

}  // namespace

Cooperation::Cooperation(PortTable& ports, const KeyDirectory& keys, AuditLog& audit, const Clock& clock,
                         const FrameworkIdentity& framework, Millis default_timeout)
    : ports_(ports),
      keys_(keys),
      audit_(audit),
      clock_(clock),
      framework_(framework),
      default_timeout_(default_timeout) {}

Cooperation::~Cooperation() {
    std::unique_lock lock(inflight_mu_);
    inflight_cv_.wait(lock, [&] { return inflight_ == 0; });
}

void Cooperation::attach_backend(const std::string& handle, std::shared_ptr<Backend> backend) {
    std::unique_lock lock(backends_mu_);
    backends_[handle] = std::move(backend);
}

Envelope Cooperation::make_fault(const Envelope& request, FaultCode code, const std::string& detail) const {
    auto fault = build_envelope({framework_.admin_id, framework_.port_id},
                                {request.sender.admin_id, request.sender.port_id}, Profile::Sync,
                                MessageKind::Fault, fault_body({code, detail}), request.envelope_id, clock_);
    fault.security = SignatureBlock{framework_.admin_id, framework_.key_id, std::string(kEd25519),
                                    sign_detached(canonical_bytes(fault), framework_.keys.secret_key)};
    return fault;
}

Envelope Cooperation::invoke(const std::string& endpoint, const Envelope& request, Millis timeout) {
    std::function<Envelope()> call;
    if (endpoint.starts_with("inproc://")) {
        std::shared_ptr<Backend> backend;
        {
            std::shared_lock lock(backends_mu_);
            auto it = backends_.find(endpoint.substr(9));
            if (it == backends_.end()) throw std::runtime_error("no in-process backend at " + endpoint);
            backend = it->second;
        }
        call = [backend, request] { return backend->handle(request); };
    } else if (endpoint.starts_with("http://")) {
        call = [endpoint, request, timeout] { return http_post(endpoint, request, timeout); };
    } else {
        throw std::runtime_error("unsupported endpoint scheme: " + endpoint);
    }

    auto pending = std::make_shared<Pending>();
    {
        std::lock_guard lock(inflight_mu_);
        ++inflight_;
    }
    std::thread([this, pending, call = std::move(call)] {
        std::optional<Envelope> response;
        std::string error;
        try {
            response = call();
        } catch (const std::exception& ex) {
            error = ex.what();
        } catch (...) {
            error = "unknown backend exception";
        }
        std::lock_guard lock(pending->mu);
        pending->response = std::move(response);
        pending->error = std::move(error);
        pending->done = true;
        pending->cv.notify_all();
        std::lock_guard done(inflight_mu_);
        --inflight_;
        inflight_cv_.notify_all();
    }).detach();

    std::unique_lock lock(pending->mu);
    if (!pending->cv.wait_for(lock, timeout, [&] { return pending->done; })) throw TimeoutError{};
    if (!pending->response) throw std::runtime_error(pending->error);
    return std::move(*pending->response);
}

std::optional<std::string> Cooperation::check_response(const Envelope& request, const Envelope& response) const {
    if (response.message_kind != MessageKind::Response && response.message_kind != MessageKind::Fault)
        return "backend answered with a " + std::string(to_string(response.message_kind)) + " envelope";
    if (response.correlation_id != request.envelope_id) return "response correlation_id does not match request";
    if (response.sender.admin_id != request.destination.admin_id)
        return "response sent by " + response.sender.admin_id + " instead of " + request.destination.admin_id;
    auto report = verify_envelope(response, keys_);
    if (!report.valid) return "response signature: " + std::string(to_string(report.reason));
    return std::nullopt;
}

Envelope Cooperation::exchange_sync(const Envelope& request, std::optional<Millis> timeout,
                                    const std::optional<std::string>& attempt_key) {
    const auto correlation = request.correlation_id.value_or(request.envelope_id);
    const auto subject = request.destination.admin_id + "/" + request.destination.service_id;
    const auto& actor = request.sender.admin_id;

    auto finish = [&](Envelope reply, Outcome outcome, const std::string& detail) -> Envelope {
        try {
            audit_.record(AuditCategory::ExchangeResponse, correlation, actor, subject, outcome, detail,
                          keyed(attempt_key, "/response"));
        } catch (const Error& ex) {
            return make_fault(request, FaultCode::StorageFailure, ex.what());
        }
        return reply;
    };
    auto fault = [&](FaultCode code, const std::string& detail) {
        return finish(make_fault(request, code, detail), Outcome::Fault,
                      std::string(to_string(code)) + ": " + detail);
    };

    std::optional<std::string> rejection;
    if (request.profile != Profile::Sync || request.message_kind != MessageKind::Request) {
        rejection = "exchange_sync needs a sync request envelope";
    } else if (auto report = verify_envelope(request, keys_); !report.valid) {
        rejection = std::string(to_string(report.reason));
    }

    try {
        audit_.record(AuditCategory::ExchangeRequest, correlation, actor, subject,
                      rejection ? Outcome::Fault : Outcome::Ok, "envelope " + request.envelope_id,
                      keyed(attempt_key, "/request"));
    } catch (const Error& ex) {
        return make_fault(request, FaultCode::StorageFailure, ex.what());
    }
    if (rejection) return fault(FaultCode::VerificationFailed, *rejection);

    std::string endpoint;
    try {
        endpoint = ports_.resolve(request.destination);
    } catch (const Error&) {
        return fault(FaultCode::NoRoute, subject);
    }

    const auto limit = timeout.value_or(default_timeout_);
    Envelope response;
    try {
        response = invoke(endpoint, request, limit);
    } catch (const TimeoutError&) {
        return fault(FaultCode::Timeout, "no answer within " + std::to_string(limit.count()) + " ms");
    } catch (const std::exception& ex) {
        return fault(FaultCode::BackendFault, ex.what());
    }

    if (auto problem = check_response(request, response)) return fault(FaultCode::BackendFault, *problem);
    if (response.message_kind == MessageKind::Fault) {
        const auto info = fault_info(response);
        const auto detail = "backend fault: " + (info ? info->detail : std::string());
        return finish(std::move(response), Outcome::Fault, detail);
    }
    const auto detail = "envelope " + response.envelope_id;
    return finish(std::move(response), Outcome::Ok, detail);
}

}  // namespace ssc
