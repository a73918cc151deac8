// SPDX-License-Identifier: Apache-2.0
//
// Transport-neutral HTTP+JSON API. The same router serves the socket server
// and the in-process client used by scenarios and tests.
#pragma once

#include "ssc/error.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ssc {

class Gateway;

struct HttpRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    /// Lower-case names.
    std::map<std::string, std::string> headers;
    std::string body;
};

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    std::map<std::string, std::string> headers;

    nlohmann::json json() const;
};

class ApiRouter {
public:
    ApiRouter(Gateway& gateway, std::vector<std::string> cors_origins = {});

    /// Never throws; errors become {"error":<code>,"detail":...} responses.
    HttpResponse handle(const HttpRequest& request);

private:
    HttpResponse dispatch(const HttpRequest& request);
    void apply_cors(const HttpRequest& request, HttpResponse& response) const;

    Gateway& gw_;
    std::vector<std::string> cors_origins_;
};

class GatewayClient {
public:
    virtual ~GatewayClient() = default;
    virtual HttpResponse send(const HttpRequest& request) = 0;

    HttpResponse request(const std::string& method, const std::string& path,
                         const std::optional<nlohmann::json>& body = std::nullopt, const std::string& token = {},
                         const std::map<std::string, std::string>& query = {});
    /// Sends `body` verbatim (serialized envelopes).
    HttpResponse post_raw(const std::string& path, std::string body, const std::string& token = {});
};

class InProcessClient : public GatewayClient {
public:
    explicit InProcessClient(ApiRouter& router) : router_(router) {}
    HttpResponse send(const HttpRequest& request) override { return router_.handle(request); }

private:
    ApiRouter& router_;
};

/// Maps error codes to HTTP status codes.
int http_status_for(ErrorCode code) noexcept;

}  // namespace ssc
