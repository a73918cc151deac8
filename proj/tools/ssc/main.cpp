// SPDX-License-Identifier: Apache-2.0
//
// ssc serve | scenario run | seed | audit trace
#include "ssc/api.hpp"
#include "ssc/error.hpp"
#include "ssc/gateway.hpp"
#include "ssc/http.hpp"
#include "ssc/scenario.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;

namespace {

void write_port_file(const std::string& path, int port) {
    // Write then rename so a watcher never reads a half-written file.
    const auto tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        out << port << "\n";
    }
    fs::rename(tmp, path);
}

int serve(const std::string& config_file) {
    auto config = ssc::GatewayConfig::load(config_file);
    ssc::Gateway gateway(config);
    gateway.resume();
    ssc::ApiRouter router(gateway, config.cors_origins);
    ssc::HttpServer server(router);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    const int port = server.bind(config.listen_host, config.listen_port);
    if (!config.port_file.empty()) write_port_file(config.port_file, port);
    std::cout << "ssc listening on " << config.listen_host << ":" << port << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    server.listen();
    if (waiter.joinable()) {
        // listen() only returns through stop(), i.e. after the waiter fired.
        waiter.join();
    }
    return 0;
}

int run_scenario_file(const std::string& file, const std::string& storage, const std::string& report_file) {
    const auto scenario = ssc::load_scenario(file);
    ssc::GatewayConfig config;
    config.storage = storage;
    config.password_params = ssc::PasswordHashParams::minimum();
    ssc::Gateway gateway(config);
    const auto report = ssc::run_scenario(gateway, scenario);
    for (const auto& a : report.assertions)
        std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
    std::cout << "scenario " << report.name << ": " << (report.pass ? "passed" : "FAILED") << std::endl;
    if (!report_file.empty()) std::ofstream(report_file) << ssc::to_json(report).dump(2) << "\n";
    return report.pass ? 0 : 1;
}

int seed(int admins, double participation, const std::string& config_file) {
    ssc::GatewayConfig config;
    if (!config_file.empty()) config = ssc::GatewayConfig::load(config_file);
    ssc::Gateway gateway(config);
    const auto spawned = gateway.seed_demo(admins, participation);
    const auto online = gateway.ports().online_admins();
    std::cout << "requested " << admins << " x " << participation << " -> " << spawned.size()
              << " administrations; online: " << online.size() << "\n";
    for (const auto& a : online) std::cout << "  " << a << "\n";
    return 0;
}

int audit_trace(const std::string& correlation, const std::string& storage) {
    if (!fs::exists(fs::path(storage) / "audit.ndjson")) {
        std::cerr << "no audit log under " << storage << "\n";
        return 2;
    }
    ssc::SystemClock clock;
    ssc::AuditLog audit(std::make_unique<ssc::AppendLog>(fs::path(storage) / "audit.ndjson"), clock);
    for (const auto& r : audit.trace(correlation)) std::cout << ssc::to_json(r).dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shared services center gateway"};
    app.require_subcommand(1);

    std::string config_file;
    auto* serve_cmd = app.add_subcommand("serve", "Run the gateway HTTP service");
    serve_cmd->add_option("--config", config_file, "Gateway configuration (JSON)")->required()->check(CLI::ExistingFile);

    auto* scenario_cmd = app.add_subcommand("scenario", "Scenario tools");
    scenario_cmd->require_subcommand(1);
    auto* run_cmd = scenario_cmd->add_subcommand("run", "Run a scenario in-process; exit 0 only if every assertion passes");
    std::string scenario_file, storage, report_file;
    run_cmd->add_option("file", scenario_file, "Scenario file")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--storage", storage, "Storage directory (default: in memory)");
    run_cmd->add_option("--report", report_file, "Write the full report as JSON");

    auto* seed_cmd = app.add_subcommand("seed", "Spawn demo administrations");
    int admins = 10;
    double participation = 0.8;
    std::string seed_config;
    seed_cmd->add_option("--admins", admins, "Number of administrations")->check(CLI::NonNegativeNumber);
    seed_cmd->add_option("--participation", participation, "Participation ratio")->check(CLI::Range(0.0, 1.0));
    seed_cmd->add_option("--config", seed_config, "Gateway configuration")->check(CLI::ExistingFile);

    auto* audit_cmd = app.add_subcommand("audit", "Audit log tools");
    audit_cmd->require_subcommand(1);
    auto* trace_cmd = audit_cmd->add_subcommand("trace", "Print the records of one correlation id");
    std::string correlation, audit_storage;
    trace_cmd->add_option("correlation", correlation, "Correlation id")->required();
    trace_cmd->add_option("--storage", audit_storage, "Storage directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) return serve(config_file);
        if (*run_cmd) return run_scenario_file(scenario_file, storage, report_file);
        if (*seed_cmd) return seed(admins, participation, seed_config);
        if (*trace_cmd) return audit_trace(correlation, audit_storage);
    } catch (const ssc::Error& e) {
        std::cerr << "ssc: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ssc: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
