// SPDX-License-Identifier: Apache-2.0
#include "ssc/http.hpp"

#include "ssc/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <mutex>

namespace ssc {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

struct HttpServer::Impl {
    httplib::Server server;
};

HttpServer::HttpServer(ApiRouter& router) : impl_(std::make_unique<Impl>()) {
    auto handler = [&router](const httplib::Request& req, httplib::Response& res) {
        HttpRequest r;
        r.method = req.method;
        r.path = req.path;
        for (const auto& [k, v] : req.params) r.query[k] = v;
        for (const auto& [k, v] : req.headers) r.headers[lower(k)] = v;
        r.body = req.body;
        const auto out = router.handle(r);
        res.status = out.status;
        for (const auto& [k, v] : out.headers) res.set_header(k, v);
        res.set_content(out.body, out.content_type);
    };
    const std::string any = R"(/.*)";
    impl_->server.Get(any, handler);
    impl_->server.Post(any, handler);
    impl_->server.Patch(any, handler);
    impl_->server.Delete(any, handler);
    impl_->server.Options(any, handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) port_ = impl_->server.bind_to_any_port(host);
    else port_ = impl_->server.bind_to_port(host, port) ? port : -1;
    if (port_ < 0) fail(ErrorCode::ConfigError, "cannot listen on " + host + ":" + std::to_string(port));
    return port_;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::start() {
    thread_ = std::thread([this] { listen(); });
    impl_->server.wait_until_ready();
}

void HttpServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

struct HttpClient::Impl {
    explicit Impl(const std::string& host, int port) : client(host, port) {}
    std::mutex mu;
    httplib::Client client;
};

HttpClient::HttpClient(std::string host, int port, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>(host, port)) {
    impl_->client.set_connection_timeout(timeout);
    impl_->client.set_read_timeout(timeout);
    impl_->client.set_write_timeout(timeout);
}

HttpClient::~HttpClient() = default;

HttpResponse HttpClient::send(const HttpRequest& request) {
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
        if (k == "content-type") content_type = v;
        else headers.emplace(k, v);
    }
    std::string path = request.path;
    if (!request.query.empty()) {
        httplib::Params params(request.query.begin(), request.query.end());
        path = httplib::append_query_params(path, params);
    }

    std::lock_guard lock(impl_->mu);
    auto& c = impl_->client;
    httplib::Result res;
    if (request.method == "GET") res = c.Get(path, headers);
    else if (request.method == "POST") res = c.Post(path, headers, request.body, content_type);
    else if (request.method == "PATCH") res = c.Patch(path, headers, request.body, content_type);
    else if (request.method == "DELETE") res = c.Delete(path, headers, request.body, content_type);
    else if (request.method == "OPTIONS") res = c.Options(path, headers);
    else fail(ErrorCode::BadRequest, "unsupported method " + request.method);

    if (!res) return {0, httplib::to_string(res.error()), "text/plain", {}};
    HttpResponse out{res->status, res->body, res->get_header_value("Content-Type"), {}};
    for (const auto& [k, v] : res->headers) out.headers[k] = v;
    return out;
}

}  // namespace ssc
