// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ssc/api.hpp"

#include <chrono>
#include <memory>
#include <string>
#include <thread>

namespace ssc {

/// Socket front end for an ApiRouter.
class HttpServer {
public:
    explicit HttpServer(ApiRouter& router);
    ~HttpServer();

    /// Binds (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    /// listen() on a background thread.
    void start();
    void stop();
    int port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = -1;
    std::thread thread_;
};

class HttpClient : public GatewayClient {
public:
    HttpClient(std::string host, int port, std::chrono::milliseconds timeout = std::chrono::seconds(10));
    ~HttpClient() override;

    /// Transport failures are reported as status 0 with the error in `body`.
    HttpResponse send(const HttpRequest& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ssc
