// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ssc/audit.hpp"
#include "ssc/envelope.hpp"

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace ssc {

/// An applicative port implemented in-process. Handlers may throw; the
/// gateway turns that into a backend_fault.
class Backend {
public:
    virtual ~Backend() = default;
    virtual Envelope handle(const Envelope& request) = 0;
};

enum class PortStatus { Online, Offline };

struct ApplicativePortRecord {
    std::string admin_id;
    std::string service_id;
    /// "inproc://<handle>" or an http:// URL.
    std::string endpoint;
    PortStatus status = PortStatus::Online;
    Timestamp registered_at{};
};

enum class FaultCode { NoRoute, Timeout, VerificationFailed, BackendFault, Unauthorized, StorageFailure };
std::string_view to_string(FaultCode c) noexcept;
std::optional<FaultCode> parse_fault_code(std::string_view s) noexcept;

struct FaultInfo {
    FaultCode code = FaultCode::BackendFault;
    std::string detail;
};

inline constexpr std::string_view kJsonContentType = "application/json";

Body fault_body(const FaultInfo& info);
/// FaultInfo carried by a fault envelope, nullopt for any other envelope.
std::optional<FaultInfo> fault_info(const Envelope& e);

/// The framework's own identity: signs faults it originates and requests it
/// makes on behalf of authenticated portal users.
struct FrameworkIdentity {
    std::string admin_id = "ssc";
    std::string port_id = "gateway";
    std::string key_id = "ssc-k1";
    KeyPair keys;
};

/// Routing table of applicative ports. At most one online record per
/// (admin_id, service_id).
class PortTable {
public:
    explicit PortTable(const Clock& clock) : clock_(clock) {}

    ApplicativePortRecord register_port(const std::string& admin_id, const std::string& service_id,
                                        const std::string& endpoint);
    void deregister_port(const std::string& admin_id, const std::string& service_id);
    /// Throws NoRoute.
    std::string resolve(const Destination& destination) const;
    bool routable(const Destination& destination) const;
    std::vector<ApplicativePortRecord> list() const;
    std::vector<std::string> online_admins() const;

private:
    const Clock& clock_;
    mutable std::shared_mutex mu_;
    std::map<Destination, ApplicativePortRecord> ports_;
};

class Cooperation {
public:
    Cooperation(PortTable& ports, const KeyDirectory& keys, AuditLog& audit, const Clock& clock,
                const FrameworkIdentity& framework, Millis default_timeout);
    /// Waits for backend calls that outlived their timeout.
    ~Cooperation();
    Cooperation(const Cooperation&) = delete;
    Cooperation& operator=(const Cooperation&) = delete;

    /// Makes `backend` reachable under "inproc://<handle>".
    void attach_backend(const std::string& handle, std::shared_ptr<Backend> backend);

    ApplicativePortRecord register_applicative_port(const std::string& admin_id, const std::string& service_id,
                                                    const std::string& endpoint) {
        return ports_.register_port(admin_id, service_id, endpoint);
    }
    void deregister_applicative_port(const std::string& admin_id, const std::string& service_id) {
        ports_.deregister_port(admin_id, service_id);
    }
    std::string resolve_route(const Destination& destination) const { return ports_.resolve(destination); }

    /// Never throws for exchange failures: always returns either the backend's
    /// response or a fault envelope signed by the framework. `attempt_key`
    /// marks a retry of the same logical exchange, which is audited once.
    Envelope exchange_sync(const Envelope& request, std::optional<Millis> timeout = std::nullopt,
                           const std::optional<std::string>& attempt_key = std::nullopt);

    /// Fault envelope addressed back to the sender of `request`.
    Envelope make_fault(const Envelope& request, FaultCode code, const std::string& detail) const;

    Millis default_timeout() const { return default_timeout_; }

private:
    Envelope invoke(const std::string& endpoint, const Envelope& request, Millis timeout);
    std::optional<std::string> check_response(const Envelope& request, const Envelope& response) const;

    PortTable& ports_;
    const KeyDirectory& keys_;
    AuditLog& audit_;
    const Clock& clock_;
    const FrameworkIdentity& framework_;
    Millis default_timeout_;
    mutable std::shared_mutex backends_mu_;
    std::map<std::string, std::shared_ptr<Backend>> backends_;
    std::mutex inflight_mu_;
    std::condition_variable inflight_cv_;
    std::size_t inflight_ = 0;
};

}  // namespace ssc
